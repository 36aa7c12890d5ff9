"""Domain types shared by the whole toolkit.

Elements carry a unique integer id plus a fixed-length feature vector.  A
stream prefix is summarised as exact per-id counts together with the feature
matrix of the distinct ids, in first-appearance order.  A hashing scheme is
an integer bucket code per distinct id (equivalently a one-hot assignment
matrix with one 1 per row).

All types are plain values: construct once, then share freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Element:
    """A stream element: unique non-negative id plus its feature vector."""

    id: int
    features: np.ndarray


class StreamPrefix:
    """Exact summary of an observed stream prefix.

    Attributes:
        events: the raw id sequence, length ``total``.
        ids: distinct ids in first-appearance order, length ``n``.
        freqs: per-id occurrence counts aligned with ``ids``.
        feats: ``(n, p)`` feature matrix aligned with ``ids``.
        index: id -> row position in ``ids``.
    """

    def __init__(self, events, ids, freqs, feats):
        self.events = np.asarray(events, dtype=np.int64)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.freqs = np.asarray(freqs, dtype=np.int64)
        self.feats = np.asarray(feats, dtype=np.float64)
        if self.feats.ndim != 2 or len(self.feats) != len(self.ids):
            raise ValueError("feature matrix must be (n, p) aligned with ids")
        if len(self.freqs) != len(self.ids):
            raise ValueError("freqs must align with ids")
        if np.any(self.freqs < 1):
            raise ValueError("every recorded id needs a count of at least 1")
        self.index = {int(i): pos for pos, i in enumerate(self.ids)}

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def p(self) -> int:
        return self.feats.shape[1]

    @property
    def total(self) -> int:
        return len(self.events)

    @property
    def freq(self) -> dict:
        """Map id -> count."""
        return {int(i): int(f) for i, f in zip(self.ids, self.freqs)}

    @property
    def universe(self) -> dict:
        """Map id -> Element for every distinct id seen."""
        return {
            int(i): Element(int(i), self.feats[pos])
            for pos, i in enumerate(self.ids)
        }

    @classmethod
    def from_id_events(cls, events, feature_table) -> "StreamPrefix":
        """Build from an id sequence and a dense id-indexed feature table.

        ``feature_table`` is an ``(|U|, p)`` array where row k holds the
        features of id k.  Vectorised; preferred for generated streams.
        """
        events = np.asarray(events, dtype=np.int64)
        if len(events) == 0:
            raise ValueError("empty prefix: no events to ingest")
        uniq, first, counts = np.unique(
            events, return_index=True, return_counts=True
        )
        order = np.argsort(first, kind="stable")
        ids = uniq[order]
        freqs = counts[order]
        feats = np.asarray(feature_table, dtype=np.float64)[ids]
        return cls(events, ids, freqs, feats)

    @classmethod
    def from_counts(cls, ids, freqs, feats) -> "StreamPrefix":
        """Build from explicit per-id counts (events materialised by repeat)."""
        ids = np.asarray(ids, dtype=np.int64)
        freqs = np.asarray(freqs, dtype=np.int64)
        events = np.repeat(ids, freqs)
        return cls(events, ids, freqs, feats)


def ingest_prefix(events) -> StreamPrefix:
    """Count an iterable of ``(id, feature_vector)`` pairs into a StreamPrefix.

    Raises ValueError on an empty sequence or inconsistent feature dimension.
    """
    event_ids = []
    ids = []
    freqs = []
    feats = []
    index = {}
    dim = None
    for eid, vec in events:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError("feature vector must be one-dimensional")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ValueError(
                f"inconsistent feature dimension: {len(vec)} != {dim}"
            )
        eid = int(eid)
        if eid < 0:
            raise ValueError("element ids must be non-negative")
        event_ids.append(eid)
        pos = index.get(eid)
        if pos is None:
            index[eid] = len(ids)
            ids.append(eid)
            freqs.append(1)
            feats.append(vec)
        else:
            freqs[pos] += 1
    if not event_ids:
        raise ValueError("empty prefix: no events to ingest")
    return StreamPrefix(event_ids, ids, freqs, np.vstack(feats))


@dataclass
class HashScheme:
    """Assignment of n distinct ids to b buckets.

    ``code[i]`` is the bucket of the id at position i; ``index`` maps id to
    that position.  Equivalent to a one-hot matrix with one 1 per row.
    """

    code: np.ndarray
    b: int
    index: dict = field(repr=False)

    def __post_init__(self):
        self.code = np.asarray(self.code, dtype=np.int64)

    @classmethod
    def from_labels(cls, ids, labels, b: int) -> "HashScheme":
        ids = np.asarray(ids, dtype=np.int64)
        index = {int(i): pos for pos, i in enumerate(ids)}
        return cls(np.asarray(labels, dtype=np.int64), int(b), index)

    def bucket_of(self, eid: int) -> int:
        return int(self.code[self.index[int(eid)]])

    def to_one_hot(self) -> np.ndarray:
        z = np.zeros((len(self.code), self.b), dtype=np.int8)
        z[np.arange(len(self.code)), self.code] = 1
        return z

    @classmethod
    def from_one_hot(cls, z, ids) -> "HashScheme":
        z = np.asarray(z)
        if np.any(z.sum(axis=1) != 1):
            raise ValueError("each row must have exactly one 1")
        return cls.from_labels(ids, np.argmax(z, axis=1), z.shape[1])


def validate_scheme(scheme: HashScheme, prefix: StreamPrefix) -> bool:
    """True iff the scheme exactly covers the prefix universe with in-range codes."""
    if len(scheme.code) != prefix.n:
        return False
    if len(scheme.code) and (
        scheme.code.min() < 0 or scheme.code.max() >= scheme.b
    ):
        return False
    if scheme.index.keys() != prefix.index.keys():
        return False
    return True


@dataclass
class BucketStats:
    """Cached per-bucket membership statistics and error terms.

    ``sim_err`` counts ordered member pairs, so a two-element bucket pays each
    squared distance twice; this keeps the +/- 2*sum update arithmetic exact.
    """

    count: int
    freq_sum: float
    mean: float
    feat_sum: np.ndarray
    feat_sqsum: float
    est_err: float
    sim_err: float

    @classmethod
    def empty(cls, p: int) -> "BucketStats":
        return cls(0, 0.0, 0.0, np.zeros(p), 0.0, 0.0, 0.0)


def rng_from_seed(seed: int) -> np.random.Generator:
    """The toolkit-wide PRNG: PCG64 seeded with a 64-bit integer.

    Every stochastic component derives its draws from this generator so that
    a seed pins byte-identical behaviour across runs and platforms.
    """
    return np.random.Generator(np.random.PCG64(seed))


def write_element_table(path, ids, feats) -> None:
    """Write ``id,feat_1,...,feat_p`` lines for a universe."""
    ids = np.asarray(ids, dtype=np.int64)
    feats = np.asarray(feats, dtype=np.float64)
    _write_rows(path, ids, feats)


def read_element_table(path):
    """Read a universe table; returns (ids, feats)."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data[:, 0].astype(np.int64), data[:, 1:]


def write_stream(path, event_ids, feature_table) -> None:
    """Write one ``id,feat_1,...,feat_p`` line per event."""
    event_ids = np.asarray(event_ids, dtype=np.int64)
    feats = np.asarray(feature_table, dtype=np.float64)[event_ids]
    _write_rows(path, event_ids, feats)


def read_stream(path):
    """Read an event file; returns (event_ids, per-event feature rows)."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data[:, 0].astype(np.int64), data[:, 1:]


def _write_rows(path, ids, feats) -> None:
    p = feats.shape[1]
    with open(path, "w") as fh:
        for eid, row in zip(ids, feats):
            fh.write("%d,%s\n" % (eid, ",".join("%.17g" % v for v in row)))
