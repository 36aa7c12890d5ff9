"""Routing unseen elements to buckets by their features.

A fitted multi-class classifier maps feature vectors to bucket labels; any
implementation exposing fit/predict plugs in.  Two are provided: a CART-style
decision tree with Gini splits and a nearest-centroid baseline.  For text
queries, a bag-of-words pipeline turns raw strings into fixed-length count
vectors (top-V vocabulary plus four character counts).
"""

from __future__ import annotations

import json
import string
from collections import Counter

import numpy as np

from .core import Element, HashScheme, StreamPrefix, rng_from_seed, validate_scheme


class Classifier:
    """fit(X, y[, n_classes]) then predict(X) -> labels in [0, n_classes)."""

    n_classes_: int | None = None

    def fit(self, X, y, n_classes=None):
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def _require_fitted(self):
        if self.n_classes_ is None:
            raise RuntimeError("classifier is not fitted")


class DecisionTree(Classifier):
    """Axis-aligned binary tree grown greedily on Gini impurity.

    Splits are midpoints between distinct sorted feature values; the split
    with the largest impurity decrease wins (first feature, then lowest
    threshold on ties).  Leaves predict their majority label, lowest label
    winning ties.
    """

    def __init__(self, max_depth: int | None = None, min_impurity_decrease: float = 0.0):
        self.max_depth = max_depth
        self.min_impurity_decrease = min_impurity_decrease
        self.n_classes_ = None

    def fit(self, X, y, n_classes=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be (n, p) aligned with y")
        if len(y) == 0:
            raise ValueError("cannot fit on an empty dataset")
        k = int(n_classes) if n_classes is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= k:
            raise ValueError("labels out of range")

        self.feature_, self.threshold_ = [], []
        self.left_, self.right_, self.value_ = [], [], []
        stack = [(X, y, 0, -1, "L")]
        while stack:
            X_node, y_node, depth, parent, side = stack.pop()
            node = self._grow_node(X_node, y_node, k, depth, stack)
            if parent >= 0:
                if side == "L":
                    self.left_[parent] = node
                else:
                    self.right_[parent] = node
        self.feature_ = np.array(self.feature_, dtype=np.int64)
        self.threshold_ = np.array(self.threshold_, dtype=np.float64)
        self.left_ = np.array(self.left_, dtype=np.int64)
        self.right_ = np.array(self.right_, dtype=np.int64)
        self.value_ = np.array(self.value_, dtype=np.int64)
        self.n_classes_ = k
        return self

    def _new_node(self):
        for arr in (self.feature_, self.threshold_, self.left_, self.right_, self.value_):
            arr.append(-1)
        return len(self.value_) - 1

    def _grow_node(self, X, y, k, depth, stack) -> int:
        node = self._new_node()
        counts = np.bincount(y, minlength=k)
        self.value_[node] = int(np.argmax(counts))
        if (
            len(y) < 2
            or counts.max() == len(y)
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return node
        split = self._best_split(X, y, k)
        if split is None:
            return node
        feat, thresh = split
        mask = X[:, feat] <= thresh
        self.feature_[node] = feat
        self.threshold_[node] = thresh
        stack.append((X[~mask], y[~mask], depth + 1, node, "R"))
        stack.append((X[mask], y[mask], depth + 1, node, "L"))
        return node

    def _best_split(self, X, y, k):
        n = len(y)
        one_hot = np.zeros((n, k))
        one_hot[np.arange(n), y] = 1.0
        total = one_hot.sum(axis=0)
        parent_gini = 1.0 - ((total / n) ** 2).sum()

        best = None
        best_gain = max(self.min_impurity_decrease, 1e-12)
        for feat in range(X.shape[1]):
            order = np.argsort(X[:, feat], kind="stable")
            xs = X[order, feat]
            cum = np.cumsum(one_hot[order], axis=0)
            cut = np.nonzero(xs[:-1] < xs[1:])[0]  # split after position i
            if len(cut) == 0:
                continue
            nl = (cut + 1).astype(np.float64)
            nr = n - nl
            left_counts = cum[cut]
            right_counts = total - left_counts
            gini_l = 1.0 - ((left_counts / nl[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((right_counts / nr[:, None]) ** 2).sum(axis=1)
            gain = parent_gini - (nl / n) * gini_l - (nr / n) * gini_r
            pos = int(np.argmax(gain))
            if gain[pos] > best_gain:
                best_gain = float(gain[pos])
                best = (feat, float((xs[cut[pos]] + xs[cut[pos] + 1]) / 2.0))
        return best

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            if self.feature_[node] < 0:
                out[idx] = self.value_[node]
                continue
            mask = X[idx, self.feature_[node]] <= self.threshold_[node]
            stack.append((self.left_[node], idx[mask]))
            stack.append((self.right_[node], idx[~mask]))
        return out


class NearestCentroid(Classifier):
    """Predicts the class whose feature centroid is nearest (squared Euclidean).

    Ties and never-seen classes resolve to the lowest class index.
    """

    def fit(self, X, y, n_classes=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        k = int(n_classes) if n_classes is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= k:
            raise ValueError("labels out of range")
        self.centroids_ = np.full((k, X.shape[1]), np.inf)
        for cls in np.unique(y):
            self.centroids_[cls] = X[y == cls].mean(axis=0)
        self.n_classes_ = k
        return self

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        X = np.asarray(X, dtype=np.float64)
        finite = np.isfinite(self.centroids_).all(axis=1)
        sq = np.full((len(X), self.n_classes_), np.inf)
        cents = self.centroids_[finite]
        sq[:, finite] = (
            -2.0 * X @ cents.T + np.einsum("ij,ij->i", cents, cents)[None, :]
        )
        return np.argmin(sq, axis=1).astype(np.int64)


class FeaturePipeline:
    """Bag-of-words over a fixed vocabulary plus four character counts.

    Output columns: one count per vocabulary token (most frequent first),
    then ASCII characters, punctuation marks, dots, and whitespace.
    """

    def __init__(self, vocabulary):
        self.vocabulary = list(vocabulary)
        self._index = {tok: i for i, tok in enumerate(self.vocabulary)}

    @property
    def dim(self) -> int:
        return len(self.vocabulary) + 4

    @staticmethod
    def tokenize(text: str):
        toks = (tok.strip(string.punctuation) for tok in text.lower().split())
        return [t for t in toks if t]

    def transform(self, queries) -> np.ndarray:
        out = np.zeros((len(queries), self.dim))
        v = len(self.vocabulary)
        for row, text in enumerate(queries):
            for tok in self.tokenize(text):
                pos = self._index.get(tok)
                if pos is not None:
                    out[row, pos] += 1.0
            out[row, v] = sum(1 for ch in text if ord(ch) < 128)
            out[row, v + 1] = sum(1 for ch in text if ch in string.punctuation)
            out[row, v + 2] = text.count(".")
            out[row, v + 3] = sum(1 for ch in text if ch.isspace())
        return out

    def to_dict(self) -> dict:
        return {"vocabulary": self.vocabulary}


def fit_pipeline(queries, vocab_size: int = 500) -> FeaturePipeline:
    """Pick the ``vocab_size`` most frequent tokens (ties lexicographic)."""
    queries = list(queries)
    if not queries:
        raise ValueError("cannot fit a pipeline on an empty corpus")
    counts = Counter()
    for text in queries:
        counts.update(FeaturePipeline.tokenize(text))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return FeaturePipeline([tok for tok, _ in ranked[:vocab_size]])


def train_bucket_classifier(
    prefix: StreamPrefix,
    scheme: HashScheme,
    clf: Classifier,
    holdout_fraction: float = 0.2,
    seed: int = 0,
):
    """Fit ``clf`` on (features, bucket) pairs; returns ``(clf, holdout_accuracy)``.

    With a positive holdout fraction the classifier is first fitted on the
    remaining rows to measure accuracy on the held-out ones, then refitted
    on everything.
    """
    if not validate_scheme(scheme, prefix):
        raise ValueError("scheme does not cover the prefix")
    X, y, k = prefix.feats, scheme.code, scheme.b
    n = len(y)
    accuracy = 1.0
    if holdout_fraction > 0.0 and n >= 2:
        rng = rng_from_seed(seed)
        perm = rng.permutation(n)
        n_hold = min(max(1, int(round(holdout_fraction * n))), n - 1)
        hold, train = perm[:n_hold], perm[n_hold:]
        clf.fit(X[train], y[train], n_classes=k)
        accuracy = float(np.mean(clf.predict(X[hold]) == y[hold]))
    clf.fit(X, y, n_classes=k)
    return clf, accuracy


def predict_bucket(clf: Classifier, element: Element) -> int:
    """Bucket label for one element; requires a fitted classifier."""
    if clf.n_classes_ is None:
        raise RuntimeError("classifier is not fitted")
    return int(clf.predict(np.asarray(element.features, dtype=np.float64)[None, :])[0])


def tune_decision_tree(
    prefix: StreamPrefix,
    scheme: HashScheme,
    depths=(4, 8, 16, None),
    min_decreases=(0.0, 1e-4, 1e-3),
    holdout_fraction: float = 0.2,
    seed: int = 0,
):
    """Small grid search on the holdout split; returns ``(clf, accuracy)``."""
    best = None
    for depth in depths:
        for dec in min_decreases:
            clf, acc = train_bucket_classifier(
                prefix,
                scheme,
                DecisionTree(max_depth=depth, min_impurity_decrease=dec),
                holdout_fraction,
                seed,
            )
            if best is None or acc > best[1]:
                best = (clf, acc)
    return best


_CLF_MAGIC = "opthash-classifier"
_CLF_VERSION = 1


def classifier_to_dict(clf: Classifier) -> dict:
    if isinstance(clf, DecisionTree):
        return {
            "kind": "decision_tree",
            "max_depth": clf.max_depth,
            "min_impurity_decrease": clf.min_impurity_decrease,
            "n_classes": clf.n_classes_,
            "feature": clf.feature_.tolist(),
            "threshold": clf.threshold_.tolist(),
            "left": clf.left_.tolist(),
            "right": clf.right_.tolist(),
            "value": clf.value_.tolist(),
        }
    if isinstance(clf, NearestCentroid):
        finite = np.isfinite(clf.centroids_).all(axis=1)
        return {
            "kind": "nearest_centroid",
            "n_classes": clf.n_classes_,
            "classes": np.nonzero(finite)[0].tolist(),
            "centroids": clf.centroids_[finite].tolist(),
        }
    raise TypeError(f"cannot serialize classifier of type {type(clf).__name__}")


def classifier_from_dict(data: dict) -> Classifier:
    if data["kind"] == "decision_tree":
        clf = DecisionTree(data["max_depth"], data["min_impurity_decrease"])
        clf.feature_ = np.array(data["feature"], dtype=np.int64)
        clf.threshold_ = np.array(data["threshold"], dtype=np.float64)
        clf.left_ = np.array(data["left"], dtype=np.int64)
        clf.right_ = np.array(data["right"], dtype=np.int64)
        clf.value_ = np.array(data["value"], dtype=np.int64)
        clf.n_classes_ = data["n_classes"]
        return clf
    if data["kind"] == "nearest_centroid":
        clf = NearestCentroid()
        cents = np.array(data["centroids"], dtype=np.float64)
        p = cents.shape[1] if len(cents) else 0
        clf.centroids_ = np.full((data["n_classes"], p), np.inf)
        clf.centroids_[np.array(data["classes"], dtype=np.int64)] = cents
        clf.n_classes_ = data["n_classes"]
        return clf
    raise ValueError(f"unknown classifier kind: {data['kind']!r}")


def save_classifier(clf: Classifier, path) -> None:
    doc = {
        "format": _CLF_MAGIC,
        "version": _CLF_VERSION,
        "classifier": classifier_to_dict(clf),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_classifier(path) -> Classifier:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _CLF_MAGIC:
        raise ValueError(f"not a classifier file: {path}")
    if doc.get("version") != _CLF_VERSION:
        raise ValueError(f"unsupported classifier version: {doc.get('version')}")
    return classifier_from_dict(doc["classifier"])
