"""Writer for the exact mixed-integer linear model of the assignment problem.

Emits an LP-format file (CPLEX dialect: objective, named constraint rows,
bounds, binary section) with four variable families:

    z_i_j   binary assignment of id i to bucket j          (n*b)
    e_i_j   absolute estimation error of i in bucket j     (n*b)
    t_i_k_j linearized product e_i_j * z_k_j               (n*n*b)
    d_i_k_j linearized product z_i_j * z_k_j               (n*n*b)

and four constraint families: one assignment row per id, two error rows per
(i, j) tying the t-sums to the bucket mean gap, three big-M rows per
(i, k, j) linking t to e and z, and three rows per (i, k, j) linking d to the
z pair.  No solver is invoked here; the file is solver input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import StreamPrefix
from ..objective import _check_lambda


def _num(x: float) -> str:
    return "%.17g" % x


@dataclass
class MilpModel:
    n: int
    b: int
    lam: float
    big_m: float
    text: str = field(repr=False)

    @property
    def variable_counts(self) -> dict:
        nb = self.n * self.b
        nnb = self.n * self.n * self.b
        return {"z": nb, "e": nb, "t": nnb, "d": nnb}

    @property
    def num_variables(self) -> int:
        return sum(self.variable_counts.values())

    @property
    def constraint_counts(self) -> dict:
        nb = self.n * self.b
        nnb = self.n * self.n * self.b
        return {
            "assignment": self.n,
            "estimation": 2 * nb,
            "t_link": 3 * nnb,
            "d_link": 3 * nnb,
        }

    @property
    def num_constraints(self) -> int:
        return sum(self.constraint_counts.values())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.text)


def export_milp(
    prefix: StreamPrefix, b: int, lam: float, big_m: float | None = None, path=None
) -> MilpModel:
    """Build the LP text for the prefix; optionally write it to ``path``."""
    lam = _check_lambda(lam)
    if b < 1:
        raise ValueError("bucket count must be positive")
    n = prefix.n
    f = prefix.freqs.astype(np.float64)
    f_max = float(f.max())
    if big_m is None:
        big_m = f_max
    elif big_m < f_max:
        raise ValueError(
            f"big-M {big_m} is below the largest prefix frequency {f_max}"
        )

    diff = prefix.feats[:, None, :] - prefix.feats[None, :, :]
    dist_sq = np.einsum("ikp,ikp->ik", diff, diff)

    lines = [f"\\ bucket assignment model: n={n} b={b} lambda={_num(lam)}"]
    lines.append("Minimize")

    terms = []
    for i in range(n):
        for j in range(b):
            if lam > 0.0:
                terms.append((lam, f"t_{i}_{i}_{j}"))
            if lam < 1.0:
                for k in range(n):
                    coef = (1.0 - lam) * dist_sq[i, k]
                    if coef != 0.0:
                        terms.append((coef, f"d_{i}_{k}_{j}"))
    if not terms:
        terms.append((0.0, "z_0_0"))
    obj = " obj:"
    parts = []
    for pos, (coef, name) in enumerate(terms):
        sign = "" if pos == 0 else "+ "
        parts.append(f"{sign}{_num(coef)} {name}")
    lines.append(obj + " " + " ".join(parts))

    lines.append("Subject To")
    for i in range(n):
        row = " + ".join(f"z_{i}_{j}" for j in range(b))
        lines.append(f" assign_{i}: {row} = 1")

    # sum_k t_ikj + sum_k (f_k - f_i) z_kj >= 0  and the mirrored row
    for i in range(n):
        for j in range(b):
            tsum = " + ".join(f"t_{i}_{k}_{j}" for k in range(n))
            lo_parts = [tsum]
            hi_parts = [tsum]
            for k in range(n):
                gap = float(f[k] - f[i])
                if gap > 0.0:
                    lo_parts.append(f"+ {_num(gap)} z_{k}_{j}")
                    hi_parts.append(f"- {_num(gap)} z_{k}_{j}")
                elif gap < 0.0:
                    lo_parts.append(f"- {_num(-gap)} z_{k}_{j}")
                    hi_parts.append(f"+ {_num(-gap)} z_{k}_{j}")
            lines.append(f" est_lo_{i}_{j}: " + " ".join(lo_parts) + " >= 0")
            lines.append(f" est_hi_{i}_{j}: " + " ".join(hi_parts) + " >= 0")

    m_str = _num(big_m)
    for i in range(n):
        for k in range(n):
            for j in range(b):
                t = f"t_{i}_{k}_{j}"
                e = f"e_{i}_{j}"
                z = f"z_{k}_{j}"
                lines.append(f" t_lb_{i}_{k}_{j}: {t} - {e} - {m_str} {z} >= -{m_str}")
                lines.append(f" t_ube_{i}_{k}_{j}: {t} - {e} <= 0")
                lines.append(f" t_ubm_{i}_{k}_{j}: {t} - {m_str} {z} <= 0")
    for i in range(n):
        for k in range(n):
            for j in range(b):
                d = f"d_{i}_{k}_{j}"
                lines.append(f" d_lb_{i}_{k}_{j}: {d} - z_{i}_{j} - z_{k}_{j} >= -1")
                lines.append(f" d_ubi_{i}_{k}_{j}: {d} - z_{i}_{j} <= 0")
                lines.append(f" d_ubk_{i}_{k}_{j}: {d} - z_{k}_{j} <= 0")

    lines.append("Bounds")
    for i in range(n):
        for k in range(n):
            for j in range(b):
                lines.append(f" 0 <= d_{i}_{k}_{j} <= 1")

    lines.append("Binary")
    names = " ".join(f"z_{i}_{j}" for i in range(n) for j in range(b))
    lines.append(" " + names)
    lines.append("End")

    model = MilpModel(n=n, b=b, lam=lam, big_m=big_m, text="\n".join(lines) + "\n")
    if path is not None:
        model.write(path)
    return model
