import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opthash.core import BucketStats, HashScheme, StreamPrefix
from opthash.objective import (
    bucket_delta_add,
    bucket_delta_remove,
    evaluate,
    similarity_error_naive,
)

from oracle_helpers import best_partition_objective


def _prefix(freqs, feats):
    feats = np.asarray(feats, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    return StreamPrefix.from_counts(np.arange(len(freqs)), freqs, feats)


def test_constant_frequencies_have_zero_estimation_error():
    prefix = _prefix([5, 5], [[0.0], [1.0]])
    scheme = HashScheme.from_labels(prefix.ids, [0, 0], 1)
    value = evaluate(scheme, prefix, 1.0)
    assert value.est == 0.0
    assert value.overall == 0.0


def test_split_partition_matches_hand_computation_and_is_optimal():
    prefix = _prefix([1, 2, 10], [[0.0], [0.0], [0.0]])
    scheme = HashScheme.from_labels(prefix.ids, [0, 0, 1], 2)
    value = evaluate(scheme, prefix, 1.0)
    assert value.est == pytest.approx(1.0, abs=1e-12)
    # exhaustive check that 1.0 is the best any 2-block partition can do
    oracle = best_partition_objective([1, 2, 10], [[0.0]] * 3, 2, 1.0)
    assert oracle == pytest.approx(1.0, abs=1e-12)


def test_ordered_pair_similarity_counts_both_directions():
    prefix = _prefix([1, 1], [[0.0], [2.0]])
    scheme = HashScheme.from_labels(prefix.ids, [0, 0], 1)
    value = evaluate(scheme, prefix, 0.0)
    assert value.sim == pytest.approx(8.0, abs=1e-12)
    assert value.overall == pytest.approx(8.0, abs=1e-12)


def test_lambda_outside_unit_interval_rejected():
    prefix = _prefix([1], [[0.0]])
    scheme = HashScheme.from_labels(prefix.ids, [0], 1)
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            evaluate(scheme, prefix, bad)


def test_singleton_buckets_cost_nothing():
    prefix = _prefix([3, 7, 11], np.random.default_rng(0).normal(size=(3, 2)))
    scheme = HashScheme.from_labels(prefix.ids, [0, 1, 2], 5)
    value = evaluate(scheme, prefix, 0.5)
    assert value.est == 0.0
    assert value.sim == 0.0


def test_bucket_relabeling_does_not_change_objective():
    rng = np.random.default_rng(1)
    prefix = _prefix(rng.integers(1, 50, 8), rng.normal(size=(8, 3)))
    code = rng.integers(0, 3, 8)
    relabel = np.array([2, 0, 1])
    a = evaluate(HashScheme.from_labels(prefix.ids, code, 3), prefix, 0.5)
    b = evaluate(HashScheme.from_labels(prefix.ids, relabel[code], 3), prefix, 0.5)
    assert a.overall == pytest.approx(b.overall, rel=1e-12)


def test_moment_identity_matches_naive_double_loop():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(2, 50))
        prefix = _prefix(rng.integers(1, 100, n), rng.normal(size=(n, 3)))
        code = rng.integers(0, 4, n)
        scheme = HashScheme.from_labels(prefix.ids, code, 4)
        fast = evaluate(scheme, prefix, 0.0).sim
        naive = similarity_error_naive(scheme, prefix)
        assert fast == pytest.approx(naive, rel=1e-9, abs=1e-9)


def test_add_to_empty_bucket():
    stats, contrib = bucket_delta_add(BucketStats.empty(1), 4, [0.0], [])
    assert stats.count == 1
    assert stats.mean == 4.0
    assert stats.est_err == 0.0
    assert stats.sim_err == 0.0
    assert contrib == 0.0


def test_add_shifts_mean_and_recomputes_deviation():
    stats = BucketStats(
        count=2, freq_sum=3.0, mean=1.5, feat_sum=np.zeros(1),
        feat_sqsum=0.0, est_err=1.0, sim_err=0.0,
    )
    new, contrib = bucket_delta_add(stats, 10, [0.0], [1, 2])
    assert new.mean == pytest.approx(13 / 3)
    assert new.est_err == pytest.approx(34 / 3)  # |1-13/3|+|2-13/3|+|10-13/3|
    assert contrib == pytest.approx(34 / 3)


def test_add_updates_similarity_by_doubled_pair():
    stats = BucketStats(
        count=1, freq_sum=1.0, mean=1.0, feat_sum=np.array([0.0, 0.0]),
        feat_sqsum=0.0, est_err=0.0, sim_err=0.0,
    )
    new, _ = bucket_delta_add(stats, 1, [1.0, 0.0], [1])
    assert new.sim_err == pytest.approx(2.0)


def test_remove_sole_member_zeroes_stats():
    stats = BucketStats(
        count=1, freq_sum=4.0, mean=4.0, feat_sum=np.array([1.0]),
        feat_sqsum=1.0, est_err=0.0, sim_err=0.0,
    )
    new, contrib = bucket_delta_remove(stats, 4, [1.0], [4])
    assert new.count == 0
    assert new.mean == 0.0
    assert new.freq_sum == 0.0
    assert contrib == 0.0


def test_remove_recomputes_remaining_deviation():
    stats = BucketStats(
        count=3, freq_sum=13.0, mean=13 / 3, feat_sum=np.zeros(1),
        feat_sqsum=0.0, est_err=34 / 3, sim_err=0.0,
    )
    new, _ = bucket_delta_remove(stats, 10, [0.0], [1, 2, 10])
    assert new.mean == pytest.approx(1.5)
    assert new.est_err == pytest.approx(1.0)


def test_remove_from_empty_bucket_is_an_error():
    with pytest.raises(ValueError):
        bucket_delta_remove(BucketStats.empty(1), 1, [0.0], [])


def test_remove_nonmember_is_an_error():
    stats, _ = bucket_delta_add(BucketStats.empty(1), 4, [0.0], [])
    with pytest.raises(ValueError, match="member"):
        bucket_delta_remove(stats, 5, [0.0], [4])


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_remove_then_readd_restores_stats(seed):
    rng = np.random.default_rng(seed)
    members = rng.integers(1, 100, int(rng.integers(1, 10)))
    feats = rng.normal(size=(len(members), 2))
    stats = BucketStats.empty(2)
    freqs = []
    for f, x in zip(members, feats):
        stats, _ = bucket_delta_add(stats, f, x, freqs)
        freqs.append(f)
    pick = int(rng.integers(0, len(members)))
    removed, _ = bucket_delta_remove(stats, members[pick], feats[pick], freqs)
    rest = [f for i, f in enumerate(freqs) if i != pick]
    readded, _ = bucket_delta_add(removed, members[pick], feats[pick], rest)
    assert readded.count == stats.count
    assert readded.mean == pytest.approx(stats.mean, rel=1e-9)
    assert readded.est_err == pytest.approx(stats.est_err, rel=1e-9, abs=1e-9)
    assert readded.sim_err == pytest.approx(stats.sim_err, rel=1e-9, abs=1e-9)


def test_incremental_matches_batch_over_random_ops():
    """Cached (e, s) track a from-scratch recomputation through add/removes."""
    rng = np.random.default_rng(7)
    stats = BucketStats.empty(2)
    members = []  # (freq, feat) pairs currently in the bucket
    for _ in range(800):
        if members and (len(members) >= 50 or rng.random() < 0.45):
            pick = int(rng.integers(0, len(members)))
            f, x = members.pop(pick)
            stats, _ = bucket_delta_remove(
                stats, f, x, [m[0] for m in members] + [f]
            )
        else:
            f = int(rng.integers(1, 100))
            x = rng.normal(size=2)
            stats, _ = bucket_delta_add(stats, f, x, [m[0] for m in members])
            members.append((f, x))
        if members:
            f_arr = np.array([m[0] for m in members], dtype=float)
            x_arr = np.array([m[1] for m in members])
            true_e = np.abs(f_arr - f_arr.mean()).sum()
            diff = x_arr[:, None, :] - x_arr[None, :, :]
            true_s = np.einsum("ikp,ikp->", diff, diff)
            assert stats.est_err == pytest.approx(true_e, rel=1e-9, abs=1e-9)
            assert stats.sim_err == pytest.approx(true_s, rel=1e-9, abs=1e-9)
        else:
            assert stats.count == 0
