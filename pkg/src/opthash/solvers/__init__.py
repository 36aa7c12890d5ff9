"""Bucket-assignment solvers: exhaustive oracle, sorted DP, coordinate descent,
and a mixed-integer model exporter."""

from .bcd import BcdConfig, bcd_optimize
from .brute import brute_force
from .dp import dp_optimize
from .milp import MilpModel, export_milp

__all__ = [
    "BcdConfig",
    "MilpModel",
    "bcd_optimize",
    "brute_force",
    "dp_optimize",
    "export_milp",
]
