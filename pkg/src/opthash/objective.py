"""Bucket-assignment objective: estimation error plus feature dispersion.

For an assignment of ids to buckets, the estimation error charges each member
the absolute gap to its bucket's mean frequency, and the similarity error
charges every ordered co-bucketed pair its squared Euclidean feature
distance.  The overall objective mixes the two with a weight ``lam``.

Similarity sums use the moment identity
``sum_(i,k) ||x_i - x_k||^2 = 2 c * sum ||x_i||^2 - 2 ||sum x_i||^2``
so one membership change costs O(p) instead of O(c * p); the naive double
loop is kept for verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BucketStats, HashScheme, StreamPrefix


@dataclass(frozen=True)
class ObjectiveValue:
    est: float
    sim: float
    overall: float
    lam: float


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return lam


def evaluate(scheme: HashScheme, prefix: StreamPrefix, lam: float) -> ObjectiveValue:
    """Exact objective of an assignment over a prefix."""
    lam = _check_lambda(lam)
    code = scheme.code
    b = scheme.b
    f = prefix.freqs.astype(np.float64)
    counts = np.bincount(code, minlength=b)
    sums = np.bincount(code, weights=f, minlength=b)
    means = np.divide(sums, counts, out=np.zeros(b), where=counts > 0)
    est = float(np.abs(f - means[code]).sum())

    sqn = np.einsum("ij,ij->i", prefix.feats, prefix.feats)
    sq_per_bucket = np.bincount(code, weights=sqn, minlength=b)
    feat_sums = np.zeros((b, prefix.p))
    np.add.at(feat_sums, code, prefix.feats)
    sim = float(
        (2.0 * counts * sq_per_bucket
         - 2.0 * np.einsum("ij,ij->i", feat_sums, feat_sums)).sum()
    )
    sim = max(sim, 0.0)  # rounding guard; exact value is non-negative
    return ObjectiveValue(est, sim, lam * est + (1.0 - lam) * sim, lam)


def similarity_error_naive(scheme: HashScheme, prefix: StreamPrefix) -> float:
    """Ordered-pair similarity error by direct double loop (verification path)."""
    total = 0.0
    for j in range(scheme.b):
        members = prefix.feats[scheme.code == j]
        for xi in members:
            diff = members - xi
            total += float(np.einsum("ij,ij->", diff, diff))
    return total


def _abs_dev(member_freqs: np.ndarray, mean: float) -> float:
    return float(np.abs(member_freqs - mean).sum())


def bucket_delta_add(stats: BucketStats, freq, feat, member_freqs, lam: float = 1.0):
    """Stats after inserting one element, plus the bucket's weighted error.

    ``member_freqs`` are the frequencies of the current members (the element
    being added excluded).  The estimation error is recomputed over the new
    membership because the mean shifts; the similarity error is updated via
    the moment identity.
    """
    lam = _check_lambda(lam)
    feat = np.asarray(feat, dtype=np.float64)
    freq = float(freq)
    member_freqs = np.asarray(member_freqs, dtype=np.float64)
    if len(member_freqs) != stats.count:
        raise ValueError("member_freqs inconsistent with cached count")

    c_new = stats.count + 1
    freq_sum = stats.freq_sum + freq
    mean = freq_sum / c_new
    est = _abs_dev(member_freqs, mean) + abs(freq - mean)

    feat_sq = float(feat @ feat)
    sim = stats.sim_err + 2.0 * (
        stats.count * feat_sq - 2.0 * float(feat @ stats.feat_sum) + stats.feat_sqsum
    )
    new = BucketStats(
        count=c_new,
        freq_sum=freq_sum,
        mean=mean,
        feat_sum=stats.feat_sum + feat,
        feat_sqsum=stats.feat_sqsum + feat_sq,
        est_err=est,
        sim_err=sim,
    )
    return new, lam * est + (1.0 - lam) * sim


def bucket_delta_remove(stats: BucketStats, freq, feat, member_freqs, lam: float = 1.0):
    """Inverse of :func:`bucket_delta_add`.

    ``member_freqs`` are the current members including the removed element.
    Removing the sole member yields the zero stats.
    """
    lam = _check_lambda(lam)
    if stats.count < 1:
        raise ValueError("cannot remove from an empty bucket")
    feat = np.asarray(feat, dtype=np.float64)
    freq = float(freq)
    member_freqs = np.asarray(member_freqs, dtype=np.float64)
    if len(member_freqs) != stats.count:
        raise ValueError("member_freqs inconsistent with cached count")

    # drop one occurrence of the removed frequency, then re-measure
    drop = int(np.argmin(np.abs(member_freqs - freq)))
    if abs(member_freqs[drop] - freq) > 1e-9:
        raise ValueError("removed element is not a bucket member")

    c_new = stats.count - 1
    if c_new == 0:
        new = BucketStats.empty(len(feat))
        return new, 0.0

    freq_sum = stats.freq_sum - freq
    mean = freq_sum / c_new
    remaining = np.delete(member_freqs, drop)
    est = _abs_dev(remaining, mean)

    feat_sq = float(feat @ feat)
    feat_sum = stats.feat_sum - feat
    feat_sqsum = stats.feat_sqsum - feat_sq
    sim = stats.sim_err - 2.0 * (
        c_new * feat_sq - 2.0 * float(feat @ feat_sum) + feat_sqsum
    )
    sim = max(sim, 0.0)
    new = BucketStats(
        count=c_new,
        freq_sum=freq_sum,
        mean=mean,
        feat_sum=feat_sum,
        feat_sqsum=feat_sqsum,
        est_err=est,
        sim_err=sim,
    )
    return new, lam * est + (1.0 - lam) * sim
