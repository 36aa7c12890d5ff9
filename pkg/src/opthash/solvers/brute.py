"""Exhaustive assignment oracle for small instances.

Enumerates every partition of n ids into at most b unlabeled blocks via
restricted-growth strings and returns a global optimum of the mixed
objective.  Capped at n <= 12; meant as ground truth for the other solvers.
"""

from __future__ import annotations

import numpy as np

from ..core import HashScheme, StreamPrefix
from ..objective import _check_lambda

_MAX_N = 12
_CHUNK = 65536


def _rgs_matrix(n: int, b: int) -> np.ndarray:
    """All restricted-growth strings of length n using fewer than b+1 labels."""
    codes = np.zeros((1, 1), dtype=np.int8)
    maxes = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        k = np.minimum(maxes.astype(np.int64) + 2, b)  # children per string
        parent = np.repeat(np.arange(len(codes)), k)
        offsets = np.concatenate(([0], np.cumsum(k)[:-1]))
        child = (np.arange(k.sum()) - np.repeat(offsets, k)).astype(np.int8)
        codes = np.concatenate([codes[parent], child[:, None]], axis=1)
        maxes = np.maximum(maxes[parent], child)
    return codes


def brute_force(prefix: StreamPrefix, b: int, lam: float):
    """Globally optimal scheme by enumeration; returns ``(scheme, objective)``."""
    lam = _check_lambda(lam)
    if b < 1:
        raise ValueError("bucket count must be positive")
    n = prefix.n
    if n > _MAX_N:
        raise ValueError(f"brute force capped at n <= {_MAX_N}, got {n}")

    f = prefix.freqs.astype(np.float64)
    diff = prefix.feats[:, None, :] - prefix.feats[None, :, :]
    dist_sq = np.einsum("ikp,ikp->ik", diff, diff)

    codes = _rgs_matrix(n, b)
    best_obj = np.inf
    best_code = codes[0]
    for lo in range(0, len(codes), _CHUNK):
        chunk = codes[lo : lo + _CHUNK].astype(np.int64)
        m = len(chunk)
        one_hot = np.zeros((m, n, b))
        one_hot[np.arange(m)[:, None], np.arange(n)[None, :], chunk] = 1.0
        counts = one_hot.sum(axis=1)
        sums = np.einsum("pnb,n->pb", one_hot, f)
        means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        per_elem = np.take_along_axis(means, chunk, axis=1)
        est = np.abs(f[None, :] - per_elem).sum(axis=1)

        same = chunk[:, :, None] == chunk[:, None, :]
        sim = np.einsum("pik,ik->p", same, dist_sq)

        obj = lam * est + (1.0 - lam) * sim
        pos = int(np.argmin(obj))
        if obj[pos] < best_obj:
            best_obj = float(obj[pos])
            best_code = chunk[pos]

    scheme = HashScheme.from_labels(prefix.ids, best_code, b)
    return scheme, best_obj
