"""Frequency estimators behind one update/query interface.

Three estimators share the interface: the classic random-hash counter grid
(Count-Min), its learned variant with exact counters for oracle-supplied
heavy hitters, and the bucket-mean sketch built from a learned hashing
scheme plus a classifier for ids that were never stored.  A Bloom filter
supports the adaptive distinct-counting mode of the latter.

Counters are 64-bit internally; memory accounting charges 4 bytes per
bucket, 2 buckets per exact heavy-hitter slot, 1 bucket per stored id and
1 bucket per 32 Bloom bits.
"""

from __future__ import annotations

import json

import numpy as np

from .classify import Classifier, classifier_from_dict, classifier_to_dict
from .core import HashScheme, StreamPrefix

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_SHIFT32 = np.uint64(32)


def _splitmix64(x: int) -> int:
    """Seed scrambler; decorrelates per-level hash parameters."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class MultiplyShiftHash:
    """Seeded multiply-shift hash over 64-bit ids, reduced modulo a range."""

    def __init__(self, seed: int):
        s = _splitmix64(seed)
        self.a = np.uint64(_splitmix64(s) | 1)  # odd multiplier
        self.b = np.uint64(_splitmix64(s ^ 0xDA3E39CB94B95BDB))

    def bucket(self, ids, m: int):
        ids = np.asarray(ids, dtype=np.uint64)
        with np.errstate(over="ignore"):
            mixed = (self.a * ids + self.b) >> _SHIFT32
        return (mixed % np.uint64(m)).astype(np.int64)


def _level_hashes(seed: int, count: int):
    return [MultiplyShiftHash(_splitmix64(seed) ^ (0x9E37 * (l + 1))) for l in range(count)]


class CountMinSketch:
    """Counter grid with d seeded hash rows; query takes the row minimum.

    Estimates never undercount: every occurrence lands on each row's counter.
    """

    def __init__(self, width: int, depth: int, seed: int = 0):
        if width < 1 or depth < 1:
            raise ValueError("width and depth must be at least 1")
        self.width = width
        self.depth = depth
        self.seed = seed
        self.counters = np.zeros((depth, width), dtype=np.int64)
        self.hashes = _level_hashes(seed, depth)

    @property
    def memory_buckets(self) -> int:
        return self.width * self.depth

    def update(self, eid: int, delta: int = 1) -> None:
        if delta < 1:
            raise ValueError("delta must be at least 1")
        self.update_many(np.array([eid]), np.array([delta]))

    def update_many(self, ids, counts=None) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        if counts is None:
            uniq, cnt = np.unique(ids, return_counts=True)
        else:
            uniq, cnt = ids, np.asarray(counts, dtype=np.int64)
        for l in range(self.depth):
            np.add.at(self.counters[l], self.hashes[l].bucket(uniq, self.width), cnt)

    def query(self, eid: int) -> int:
        return int(self.query_many(np.array([eid]))[0])

    def query_many(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        est = np.full(len(ids), np.iinfo(np.int64).max, dtype=np.int64)
        for l in range(self.depth):
            est = np.minimum(est, self.counters[l][self.hashes[l].bucket(ids, self.width)])
        return est

    def to_dict(self) -> dict:
        return {
            "kind": "cms",
            "width": self.width,
            "depth": self.depth,
            "seed": self.seed,
            "counters": self.counters.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CountMinSketch":
        sk = cls(data["width"], data["depth"], data["seed"])
        sk.counters = np.array(data["counters"], dtype=np.int64).reshape(
            data["depth"], data["width"]
        )
        return sk


class LearnedCMS:
    """Exact counters for oracle heavy hitters, Count-Min for the rest.

    Each exact slot stores an id alongside its counter, so it is charged as
    two plain buckets; the backing grid gets whatever budget remains.
    """

    def __init__(self, heavy_ids, b_total: int, b_heavy: int, depth: int, seed: int = 0):
        if 2 * b_heavy > b_total:
            raise ValueError(
                f"b_heavy={b_heavy} needs {2 * b_heavy} buckets, over budget {b_total}"
            )
        heavy_ids = np.asarray(list(heavy_ids), dtype=np.int64)
        if len(heavy_ids) > b_heavy:
            raise ValueError(
                f"{len(heavy_ids)} oracle ids exceed the {b_heavy} exact slots"
            )
        self.heavy_ids = np.sort(heavy_ids)
        self.heavy_counts = np.zeros(len(self.heavy_ids), dtype=np.int64)
        self.b_total = b_total
        self.b_heavy = b_heavy
        b_random = b_total - 2 * b_heavy
        width = max(b_random // depth, 1)
        self.backing = CountMinSketch(width, depth, seed)

    @property
    def memory_buckets(self) -> int:
        return 2 * self.b_heavy + self.backing.memory_buckets

    def _heavy_pos(self, ids):
        pos = np.searchsorted(self.heavy_ids, ids)
        pos = np.minimum(pos, max(len(self.heavy_ids) - 1, 0))
        hit = (
            np.zeros(len(ids), dtype=bool)
            if len(self.heavy_ids) == 0
            else self.heavy_ids[pos] == ids
        )
        return pos, hit

    def update(self, eid: int, delta: int = 1) -> None:
        self.update_many(np.array([eid]), np.array([delta]))

    def update_many(self, ids, counts=None) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        if counts is None:
            ids, counts = np.unique(ids, return_counts=True)
        counts = np.asarray(counts, dtype=np.int64)
        pos, hit = self._heavy_pos(ids)
        np.add.at(self.heavy_counts, pos[hit], counts[hit])
        if np.any(~hit):
            self.backing.update_many(ids[~hit], counts[~hit])

    def query(self, eid: int) -> int:
        return int(self.query_many(np.array([eid]))[0])

    def query_many(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        pos, hit = self._heavy_pos(ids)
        est = self.backing.query_many(ids)
        est[hit] = self.heavy_counts[pos[hit]]
        return est

    def to_dict(self) -> dict:
        return {
            "kind": "lcms",
            "b_total": self.b_total,
            "b_heavy": self.b_heavy,
            "heavy_ids": self.heavy_ids.tolist(),
            "heavy_counts": self.heavy_counts.tolist(),
            "backing": self.backing.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LearnedCMS":
        sk = cls(
            data["heavy_ids"],
            data["b_total"],
            data["b_heavy"],
            data["backing"]["depth"],
            data["backing"]["seed"],
        )
        sk.heavy_counts = np.array(data["heavy_counts"], dtype=np.int64)
        sk.backing = CountMinSketch.from_dict(data["backing"])
        return sk


class BloomFilter:
    """Plain m-bit Bloom filter with k seeded hash positions per id."""

    def __init__(self, bits: int, hash_count: int, seed: int = 0):
        if bits < 1 or hash_count < 1:
            raise ValueError("bits and hash_count must be at least 1")
        self.bits = bits
        self.hash_count = hash_count
        self.seed = seed
        self.array = np.zeros(bits, dtype=bool)
        self.hashes = _level_hashes(seed ^ 0x5BF03635, hash_count)

    @classmethod
    def sized_for(cls, expected: int, bits_per_key: int = 10, hash_count: int = 7, seed: int = 0):
        return cls(max(expected, 1) * bits_per_key, hash_count, seed)

    @property
    def memory_buckets(self) -> int:
        """Budget charge: one 4-byte bucket per 32 bits."""
        return -(-self.bits // 32)

    def insert(self, eid: int) -> None:
        self.insert_many(np.array([eid]))

    def insert_many(self, ids) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        for h in self.hashes:
            self.array[h.bucket(ids, self.bits)] = True

    def contains(self, eid: int) -> bool:
        return bool(self.contains_many(np.array([eid]))[0])

    def contains_many(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        hit = np.ones(len(ids), dtype=bool)
        for h in self.hashes:
            hit &= self.array[h.bucket(ids, self.bits)]
        return hit

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "hash_count": self.hash_count,
            "seed": self.seed,
            "data": np.packbits(self.array).tobytes().hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BloomFilter":
        bf = cls(data["bits"], data["hash_count"], data["seed"])
        raw = np.frombuffer(bytes.fromhex(data["data"]), dtype=np.uint8)
        bf.array = np.unpackbits(raw)[: data["bits"]].astype(bool)
        return bf


class OptHashSketch:
    """Bucket-mean estimator over a learned id-to-bucket assignment.

    Stored ids route through the learned map; anything else goes through the
    classifier.  Static mode counts only stored ids and keeps the per-bucket
    membership counts fixed; adaptive mode counts everything and grows the
    membership count whenever the Bloom filter says an id is new.
    """

    def __init__(self, seen_ids, seen_buckets, b, freq_sums, member_counts,
                 classifier, mode, bloom=None):
        order = np.argsort(seen_ids)
        self.seen_ids = np.asarray(seen_ids, dtype=np.int64)[order]
        self.seen_buckets = np.asarray(seen_buckets, dtype=np.int64)[order]
        self.b = b
        self.freq_sums = np.asarray(freq_sums, dtype=np.int64)
        self.member_counts = np.asarray(member_counts, dtype=np.int64)
        self.classifier = classifier
        if mode not in ("static", "adaptive"):
            raise ValueError(f"unknown mode: {mode!r}")
        if mode == "adaptive" and bloom is None:
            raise ValueError("adaptive mode requires a Bloom filter")
        self.mode = mode
        self.bloom = bloom

    @classmethod
    def build(cls, scheme: HashScheme, prefix: StreamPrefix, classifier: Classifier,
              mode: str = "static", bloom_bits_per_key: int = 10,
              bloom_hashes: int = 7, seed: int = 0) -> "OptHashSketch":
        """Initialize counters from the prefix counts of the scheme's ids."""
        from .core import validate_scheme

        if not validate_scheme(scheme, prefix):
            raise ValueError("scheme does not cover the prefix")
        n_classes = getattr(classifier, "n_classes_", None)
        if n_classes != scheme.b:
            raise ValueError(
                f"classifier has {n_classes} classes, scheme has {scheme.b} buckets"
            )
        freq_sums = np.bincount(
            scheme.code, weights=prefix.freqs.astype(np.float64), minlength=scheme.b
        ).astype(np.int64)
        member_counts = np.bincount(scheme.code, minlength=scheme.b).astype(np.int64)
        bloom = None
        if mode == "adaptive":
            bloom = BloomFilter.sized_for(
                4 * prefix.n, bloom_bits_per_key, bloom_hashes, seed
            )
            bloom.insert_many(prefix.ids)
        return cls(prefix.ids, scheme.code, scheme.b, freq_sums, member_counts,
                   classifier, mode, bloom)

    @property
    def memory_buckets(self) -> int:
        charged = self.b + len(self.seen_ids)
        if self.bloom is not None:
            charged += self.bloom.memory_buckets
        return charged

    def _stored_lookup(self, ids):
        """(bucket, hit) arrays; bucket valid only where hit."""
        pos = np.searchsorted(self.seen_ids, ids)
        pos = np.minimum(pos, max(len(self.seen_ids) - 1, 0))
        hit = (
            np.zeros(len(ids), dtype=bool)
            if len(self.seen_ids) == 0
            else self.seen_ids[pos] == ids
        )
        buckets = np.where(hit, self.seen_buckets[pos], 0)
        return buckets, hit

    def _route(self, eid: int, features) -> int:
        buckets, hit = self._stored_lookup(np.array([eid], dtype=np.int64))
        if hit[0]:
            return int(buckets[0])
        if features is None:
            raise ValueError("features required to route an unstored id")
        return int(self.classifier.predict(np.asarray(features)[None, :])[0])

    def update(self, eid: int, features=None, delta: int = 1) -> None:
        if self.mode == "static":
            buckets, hit = self._stored_lookup(np.array([eid], dtype=np.int64))
            if hit[0]:
                self.freq_sums[buckets[0]] += delta
            return
        j = self._route(eid, features)
        self.freq_sums[j] += delta
        if not self.bloom.contains(eid):
            self.member_counts[j] += 1
            self.bloom.insert(eid)

    def update_many_static(self, ids, counts=None) -> None:
        """Vectorized static-mode bulk update (unstored ids are ignored)."""
        if self.mode != "static":
            raise ValueError("bulk path is static-mode only")
        ids = np.asarray(ids, dtype=np.int64)
        if counts is None:
            ids, counts = np.unique(ids, return_counts=True)
        counts = np.asarray(counts, dtype=np.int64)
        buckets, hit = self._stored_lookup(ids)
        np.add.at(self.freq_sums, buckets[hit], counts[hit])

    def query(self, eid: int, features=None) -> float:
        j = self._route(eid, features)
        if self.member_counts[j] == 0:
            return 0.0
        est = self.freq_sums[j] / self.member_counts[j]
        if self.mode == "adaptive" and not self.bloom.contains(eid):
            return 0.0
        return float(est)

    def query_many(self, ids, features=None) -> np.ndarray:
        """Vectorized query; ``features`` rows align with unstored ids' rows."""
        ids = np.asarray(ids, dtype=np.int64)
        buckets, hit = self._stored_lookup(ids)
        if not np.all(hit):
            if features is None:
                raise ValueError("features required to route unstored ids")
            feats = np.asarray(features, dtype=np.float64)
            buckets = buckets.copy()
            buckets[~hit] = self.classifier.predict(feats[~hit])
        counts = self.member_counts[buckets]
        est = np.divide(
            self.freq_sums[buckets].astype(np.float64),
            counts,
            out=np.zeros(len(ids)),
            where=counts > 0,
        )
        if self.mode == "adaptive":
            est *= self.bloom.contains_many(ids)
        return est

    def to_dict(self) -> dict:
        return {
            "kind": "opthash",
            "mode": self.mode,
            "b": self.b,
            "seen_ids": self.seen_ids.tolist(),
            "seen_buckets": self.seen_buckets.tolist(),
            "freq_sums": self.freq_sums.tolist(),
            "member_counts": self.member_counts.tolist(),
            "classifier": classifier_to_dict(self.classifier),
            "bloom": None if self.bloom is None else self.bloom.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptHashSketch":
        bloom = None if data["bloom"] is None else BloomFilter.from_dict(data["bloom"])
        return cls(
            np.array(data["seen_ids"], dtype=np.int64),
            np.array(data["seen_buckets"], dtype=np.int64),
            data["b"],
            np.array(data["freq_sums"], dtype=np.int64),
            np.array(data["member_counts"], dtype=np.int64),
            classifier_from_dict(data["classifier"]),
            data["mode"],
            bloom,
        )


_SKETCH_MAGIC = "opthash-sketch"
_SKETCH_VERSION = 1
_KINDS = {"cms": CountMinSketch, "lcms": LearnedCMS, "opthash": OptHashSketch}


def save_sketch(sketch, path) -> None:
    doc = {
        "format": _SKETCH_MAGIC,
        "version": _SKETCH_VERSION,
        "sketch": sketch.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_sketch(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _SKETCH_MAGIC:
        raise ValueError(f"not a sketch file: {path}")
    if doc.get("version") != _SKETCH_VERSION:
        raise ValueError(f"unsupported sketch version: {doc.get('version')}")
    data = doc["sketch"]
    return _KINDS[data["kind"]].from_dict(data)
