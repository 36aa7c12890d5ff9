import numpy as np
import pytest

from opthash.classify import (
    DecisionTree,
    FeaturePipeline,
    NearestCentroid,
    fit_pipeline,
    load_classifier,
    predict_bucket,
    save_classifier,
    train_bucket_classifier,
    tune_decision_tree,
)
from opthash.core import Element, HashScheme, StreamPrefix
from opthash.sketches import OptHashSketch
from opthash.solvers import BcdConfig, bcd_optimize
from opthash.synthgen import SynthConfig, gen_stream, gen_universe


def _prefix(freqs, feats):
    return StreamPrefix.from_counts(
        np.arange(len(freqs)), freqs, np.asarray(feats, dtype=float)
    )


# ------------------------------------------------------------------- pipeline

def test_pipeline_vocabulary_prefers_frequent_tokens():
    pipe = fit_pipeline(["a b", "a"], vocab_size=1)
    assert pipe.vocabulary == ["a"]


def test_pipeline_vocabulary_breaks_ties_lexicographically():
    pipe = fit_pipeline(["b a", "a b"], vocab_size=1)
    assert pipe.vocabulary == ["a"]


def test_pipeline_counts_dots_and_whitespace():
    pipe = fit_pipeline(["x"], vocab_size=1)
    row = pipe.transform(["www.google.com"])[0]
    v = len(pipe.vocabulary)
    assert row[v + 2] == 2  # dots
    assert row[v + 3] == 0  # whitespace


def test_pipeline_counts_ascii_and_spaces():
    pipe = fit_pipeline(["x"], vocab_size=1)
    row = pipe.transform(["sharon stone"])[0]
    v = len(pipe.vocabulary)
    assert row[v] == 12  # ascii characters
    assert row[v + 3] == 1  # whitespace


def test_pipeline_dimension_fixed_after_fitting():
    pipe = fit_pipeline(["alpha beta", "gamma delta epsilon"], vocab_size=3)
    out = pipe.transform(["anything at all", "", "alpha alpha alpha"])
    assert out.shape == (3, pipe.dim)
    assert pipe.dim == 3 + 4
    assert out[2][pipe.vocabulary.index("alpha")] == 3


def test_pipeline_empty_corpus_rejected():
    with pytest.raises(ValueError):
        fit_pipeline([])


# -------------------------------------------------------------- decision tree

def test_tree_shatters_distinct_features():
    rng = np.random.default_rng(0)
    X = np.arange(16, dtype=float)[:, None]
    y = rng.integers(0, 3, 16)
    clf = DecisionTree(max_depth=16).fit(X, y)
    assert np.array_equal(clf.predict(X), y)


def test_tree_respects_depth_limit():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 3))
    y = rng.integers(0, 4, 200)
    clf = DecisionTree(max_depth=3).fit(X, y)

    def depth(node, level):
        if clf.feature_[node] < 0:
            return level
        return max(depth(clf.left_[node], level + 1), depth(clf.right_[node], level + 1))

    assert depth(0, 0) <= 3


def test_tree_pure_leaf_returns_training_bucket():
    X = np.array([[0.0], [1.0], [5.0]])
    y = np.array([0, 0, 1])
    clf = DecisionTree().fit(X, y)
    assert clf.predict(np.array([[5.0]]))[0] == 1


def test_tree_is_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 4))
    y = rng.integers(0, 5, 100)
    a = DecisionTree(max_depth=8).fit(X, y)
    b = DecisionTree(max_depth=8).fit(X, y)
    probe = rng.normal(size=(50, 4))
    np.testing.assert_array_equal(a.predict(probe), b.predict(probe))


def test_tree_min_impurity_decrease_prunes_weak_splits():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 1))
    y = (rng.random(100) < 0.5).astype(int)  # labels independent of X
    strict = DecisionTree(min_impurity_decrease=0.2).fit(X, y)
    assert len(strict.value_) == 1  # no split worth taking


def test_tree_predictions_stay_in_class_range():
    X = np.array([[0.0], [1.0]])
    clf = DecisionTree().fit(X, np.array([2, 2]), n_classes=7)
    got = clf.predict(np.array([[-100.0], [100.0]]))
    assert set(got) == {2}


# ----------------------------------------------------------- nearest centroid

def test_centroid_picks_closest_class():
    clf = NearestCentroid().fit(np.array([[0.0], [10.0]]), np.array([0, 1]))
    assert clf.predict(np.array([[1.0]]))[0] == 0


def test_centroid_tie_goes_to_lowest_class():
    clf = NearestCentroid().fit(np.array([[0.0], [10.0]]), np.array([0, 1]))
    assert clf.predict(np.array([[5.0]]))[0] == 0


def test_centroid_never_emits_unseen_class():
    clf = NearestCentroid().fit(np.array([[0.0], [1.0]]), np.array([1, 1]), n_classes=4)
    assert clf.predict(np.array([[100.0]]))[0] == 1


# ----------------------------------------------------------- training wrapper

def test_training_on_separable_clusters_is_perfect():
    rng = np.random.default_rng(4)
    feats = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(8, 0.1, (20, 2))])
    prefix = _prefix(np.ones(40, dtype=int), feats)
    scheme = HashScheme.from_labels(prefix.ids, [0] * 20 + [1] * 20, 2)
    clf, acc = train_bucket_classifier(prefix, scheme, DecisionTree(), seed=1)
    assert acc == 1.0
    assert np.array_equal(clf.predict(feats), scheme.code)


def test_identical_features_conflicting_buckets_cap_accuracy():
    prefix = _prefix([1, 1], [[3.0], [3.0]])
    scheme = HashScheme.from_labels(prefix.ids, [0, 1], 2)
    clf, _ = train_bucket_classifier(prefix, scheme, DecisionTree(), 0.0)
    correct = (clf.predict(prefix.feats) == scheme.code).mean()
    assert correct <= 0.5


def test_single_class_scheme_yields_constant_classifier():
    prefix = _prefix([1, 2, 3], [[0.0], [1.0], [2.0]])
    scheme = HashScheme.from_labels(prefix.ids, [1, 1, 1], 3)
    clf, _ = train_bucket_classifier(prefix, scheme, DecisionTree(), seed=0)
    assert set(clf.predict(np.array([[-5.0], [5.0]]))) == {1}


def test_predict_bucket_requires_fit():
    with pytest.raises(RuntimeError, match="not fitted"):
        predict_bucket(DecisionTree(), Element(0, np.zeros(2)))


def test_predict_bucket_routes_element():
    clf = NearestCentroid().fit(np.array([[0.0], [10.0]]), np.array([0, 1]))
    assert predict_bucket(clf, Element(7, np.array([9.0]))) == 1


def test_tune_grid_returns_fitted_tree():
    rng = np.random.default_rng(5)
    feats = rng.normal(size=(60, 2))
    prefix = _prefix(rng.integers(1, 9, 60), feats)
    scheme = HashScheme.from_labels(prefix.ids, rng.integers(0, 3, 60), 3)
    clf, acc = tune_decision_tree(prefix, scheme, seed=2)
    assert clf.n_classes_ == 3
    assert 0.0 <= acc <= 1.0


# -------------------------------------------------------------- serialization

def test_classifier_files_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 4, 80)
    probe = rng.normal(size=(30, 3))
    for clf in (DecisionTree(max_depth=6).fit(X, y), NearestCentroid().fit(X, y)):
        path = tmp_path / "clf.json"
        save_classifier(clf, path)
        back = load_classifier(path)
        np.testing.assert_array_equal(back.predict(probe), clf.predict(probe))


def test_classifier_file_magic_checked(tmp_path):
    path = tmp_path / "bogus.json"
    path.write_text('{"format": "something-else", "version": 1}')
    with pytest.raises(ValueError, match="not a classifier file"):
        load_classifier(path)


# ------------------------------------------------- unseen-element performance

def test_learned_routing_beats_constant_predictor_on_unseen_elements():
    """Grouped synthetic data: a tree routes unseen ids to buckets whose means
    beat predicting the global prefix mean for everything."""
    cfg = SynthConfig(groups=6, prefix_fraction=0.33, seed=12)
    universe = gen_universe(cfg)
    prefix_events = gen_stream(universe, cfg, cfg.default_prefix_len, prefix_mode=True)
    rest = gen_stream(universe, cfg, 10 * cfg.default_prefix_len, prefix_mode=False)

    prefix = StreamPrefix.from_id_events(prefix_events, universe.feats)
    scheme, _ = bcd_optimize(prefix, 12, BcdConfig(lam=0.5, seed=3, init="dp-warm-start"))
    clf, _ = train_bucket_classifier(prefix, scheme, DecisionTree(max_depth=16), seed=3)
    sketch = OptHashSketch.build(scheme, prefix, clf)
    sketch.update_many_static(rest)

    total = np.bincount(np.concatenate([prefix_events, rest]), minlength=universe.size)
    unseen = np.setdiff1d(np.unique(rest), prefix.ids)
    true = total[unseen]
    est = sketch.query_many(unseen, features=universe.feats[unseen])
    constant = np.full(len(unseen), prefix.freqs.mean())

    learned_err = np.abs(true - est).mean()
    constant_err = np.abs(true - constant).mean()
    assert learned_err < constant_err
