"""Exact frequency-only solver: contiguous-partition DP over sorted counts.

With the feature term switched off, an optimal assignment partitions the
frequency-sorted ids into at most b contiguous segments.  Each segment is
charged the sum of absolute deviations from its center (bucket mean by
default; a median-center variant is kept for comparison).  The DP fills b
layers over n positions, O(n^2 b) time; segment costs come from prefix sums
in O(log n) each.  A dense cost cache is used when it fits in memory,
otherwise costs are recomputed per layer in O(n b) space.
"""

from __future__ import annotations

import numpy as np

from ..core import HashScheme, StreamPrefix

# largest (n+1)^2 float64 cache we are willing to hold (~320 MB)
_CACHE_CELLS = 40_000_000
_COL_CHUNK = 1024


def _cost_column(f, pref, end, center):
    """Costs of segments [l, end] for all l in 0..end (sorted positions)."""
    l = np.arange(end + 1)
    cnt = end + 1 - l
    sums = pref[end + 1] - pref[l]
    if center == "mean":
        mid = sums / cnt
        t = np.searchsorted(f, mid, side="right") - 1
        t = np.minimum(t, end)
    else:  # median
        t = (l + end) // 2
        mid = f[t]
    below_cnt = t - l + 1
    below_sum = pref[t + 1] - pref[l]
    return (mid * below_cnt - below_sum) + (sums - below_sum) - mid * (cnt - below_cnt)


def _build_cost_cache(f, pref, center):
    n = len(f)
    cache = np.full((n + 1, n + 1), np.inf)
    np.fill_diagonal(cache, 0.0)  # empty segment: partition may use fewer blocks
    for i in range(1, n + 1):
        cache[:i, i] = _cost_column(f, pref, i - 1, center)
    return cache


def dp_optimize(prefix: StreamPrefix, b: int, center: str = "mean") -> HashScheme:
    """Optimal contiguous partition of frequency-sorted ids into <= b buckets."""
    if b < 1:
        raise ValueError("bucket count must be positive")
    if center not in ("mean", "median"):
        raise ValueError(f"unknown segment center: {center!r}")
    n = prefix.n
    order = np.lexsort((prefix.ids, prefix.freqs))
    f = prefix.freqs[order].astype(np.float64)
    pref = np.concatenate(([0.0], np.cumsum(f)))

    # one segment per distinct value already reaches cost 0; more cannot help
    layers = min(b, n, len(np.unique(f)))
    cache = None
    if (n + 1) ** 2 <= _CACHE_CELLS:
        cache = _build_cost_cache(f, pref, center)

    dist = np.full(n + 1, np.inf)
    dist[0] = 0.0
    # default parent i -> i is the empty-segment transition
    parents = np.tile(np.arange(n + 1, dtype=np.int32), (layers, 1))
    for j in range(layers):
        if cache is not None:
            nxt = np.empty(n + 1)
            for lo in range(0, n + 1, _COL_CHUNK):
                hi = min(lo + _COL_CHUNK, n + 1)
                block = dist[:, None] + cache[:, lo:hi]
                am = np.argmin(block, axis=0)
                parents[j, lo:hi] = am
                nxt[lo:hi] = block[am, np.arange(hi - lo)]
            if np.array_equal(nxt, dist):
                parents[j] = np.arange(n + 1, dtype=np.int32)
                break
            dist = nxt
        else:
            nxt = np.empty(n + 1)
            nxt[0] = dist[0]
            parents[j, 0] = 0
            for i in range(1, n + 1):
                cand = dist[:i] + _cost_column(f, pref, i - 1, center)
                am = int(np.argmin(cand))
                # empty segment keeps the previous layer's value
                if dist[i] <= cand[am]:
                    nxt[i], parents[j, i] = dist[i], i
                else:
                    nxt[i], parents[j, i] = cand[am], am
            dist = nxt

    # backtrack segment boundaries, then label left to right
    bounds = []
    i = n
    for j in range(layers - 1, -1, -1):
        m = int(parents[j, i])
        if m < i:
            bounds.append((m, i))
        i = m
    if i != 0:
        raise AssertionError("DP backtrack did not consume all positions")
    bounds.reverse()
    labels_sorted = np.empty(n, dtype=np.int64)
    for label, (lo, hi) in enumerate(bounds):
        labels_sorted[lo:hi] = label
    code = np.empty(n, dtype=np.int64)
    code[order] = labels_sorted
    return HashScheme.from_labels(prefix.ids, code, b)
