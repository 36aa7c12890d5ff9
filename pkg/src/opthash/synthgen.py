"""Synthetic universes and streams, plus a query-log loader.

The grouped generator builds G groups of exponentially growing sizes whose
features are Gaussian clouds around uniform-random centers; arrivals pick a
group with probability proportional to 1/g and then an element uniformly
inside it, so small groups supply the heavy hitters.  Prefix draws restrict
each group to a fixed seeded subset, mimicking elements that only show up
later in the stream.

All sampling runs on PCG64 with explicit inverse-CDF transforms (Box-Muller
for Gaussians), so a seed pins byte-identical output on any platform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np


@dataclass
class SynthConfig:
    groups: int
    group_base: int = 2  # smallest group holds 2**(group_base + 1) elements
    feature_dim: int = 2
    prefix_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.groups < 1:
            raise ValueError("need at least one group")
        if not 0.0 < self.prefix_fraction <= 1.0:
            raise ValueError("prefix_fraction must be in (0, 1]")

    @property
    def default_prefix_len(self) -> int:
        return 10 * 2 ** self.groups


@dataclass
class Universe:
    feats: np.ndarray  # (|U|, p)
    groups: np.ndarray  # (|U|,), 1-based group label per id

    @property
    def size(self) -> int:
        return len(self.feats)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)


def _rng(seed_parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_parts)))


def _standard_normal(rng, count: int) -> np.ndarray:
    """Box-Muller transform of uniform draws."""
    half = (count + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]


def group_sizes(cfg: SynthConfig) -> np.ndarray:
    return 2 ** (cfg.group_base + np.arange(1, cfg.groups + 1, dtype=np.int64))


def gen_universe(cfg: SynthConfig) -> Universe:
    """Grouped Gaussian universe; ids run contiguously group by group."""
    rng = _rng([cfg.seed, 1])
    sizes = group_sizes(cfg)
    total = int(sizes.sum())
    centers = rng.random((cfg.groups, cfg.feature_dim)) * 20.0 - 10.0
    noise = _standard_normal(rng, total * cfg.feature_dim).reshape(
        total, cfg.feature_dim
    )
    groups = np.repeat(np.arange(1, cfg.groups + 1, dtype=np.int64), sizes)
    feats = centers[groups - 1] + noise
    return Universe(feats, groups)


def _eligible_ids(cfg: SynthConfig, sizes) -> list:
    """Per-group prefix-eligible id arrays: first ceil(g0*size) of a seeded shuffle."""
    rng = _rng([cfg.seed, 2])
    starts = np.concatenate(([0], np.cumsum(sizes)))
    eligible = []
    for g in range(cfg.groups):
        take = int(np.ceil(cfg.prefix_fraction * sizes[g]))
        perm = rng.permutation(int(sizes[g]))[:take]
        eligible.append(np.sort(perm) + starts[g])
    return eligible


def gen_stream(
    universe: Universe,
    cfg: SynthConfig,
    length: int,
    prefix_mode: bool = False,
    stream_seed=None,
) -> np.ndarray:
    """Event id sequence; prefix mode restricts draws to the eligible subsets."""
    if length < 1:
        raise ValueError("stream length must be positive")
    sizes = group_sizes(cfg)
    if stream_seed is None:
        stream_seed = [cfg.seed, 3 if prefix_mode else 4]
    rng = _rng(stream_seed)

    probs = 1.0 / np.arange(1, cfg.groups + 1)
    cum = np.cumsum(probs / probs.sum())
    gidx = np.searchsorted(cum, rng.random(length), side="right")
    gidx = np.minimum(gidx, cfg.groups - 1)

    if prefix_mode:
        pools = _eligible_ids(cfg, sizes)
    else:
        starts = np.concatenate(([0], np.cumsum(sizes)))
        pools = [np.arange(starts[g], starts[g + 1]) for g in range(cfg.groups)]
    pool_sizes = np.array([len(p) for p in pools], dtype=np.int64)

    offs = (rng.random(length) * pool_sizes[gidx]).astype(np.int64)
    events = np.empty(length, dtype=np.int64)
    for g in range(cfg.groups):
        mask = gidx == g
        events[mask] = pools[g][offs[mask]]
    return events


def gen_zipf_stream(num_elements: int, exponent: float, length: int, seed: int) -> np.ndarray:
    """Ranked draws with probability proportional to rank^-s (rank 1 = id 0)."""
    if exponent <= 0:
        raise ValueError("zipf exponent must be positive")
    if num_elements < 1 or length < 1:
        raise ValueError("need at least one element and one event")
    rng = _rng([seed, 5])
    weights = np.arange(1, num_elements + 1, dtype=np.float64) ** -exponent
    cum = np.cumsum(weights / weights.sum())
    ids = np.searchsorted(cum, rng.random(length), side="right")
    return np.minimum(ids, num_elements - 1).astype(np.int64)


@dataclass
class QueryLog:
    texts: list  # query text per id, ids assigned by first appearance
    days: list  # sorted distinct day keys
    day_events: list  # id array per day, aligned with ``days``
    skipped: int  # malformed rows dropped


def _parse_day(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return date.fromisoformat(raw[:10]).toordinal()
    except ValueError:
        pass
    try:
        return datetime.strptime(raw[:19], "%Y-%m-%d %H:%M:%S").date().toordinal()
    except ValueError:
        return None


def load_query_log(path) -> QueryLog:
    """CSV with a header naming a day/timestamp column and a query column.

    Falls back to (first column = day, second = query).  Query texts map to
    integer ids in first-appearance order; rows with an unparsable day or
    missing query are skipped and counted.
    """
    texts: list = []
    index: dict = {}
    per_day: dict = {}
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty query log: {path}")
        lowered = [h.strip().lower() for h in header]
        day_col = next(
            (i for i, h in enumerate(lowered) if h in ("day", "timestamp", "date")), 0
        )
        query_col = next(
            (i for i, h in enumerate(lowered) if h in ("query", "query_text", "text")),
            1 if day_col == 0 else 0,
        )
        need = max(day_col, query_col) + 1
        for row in reader:
            if len(row) < need:
                skipped += 1
                continue
            day = _parse_day(row[day_col])
            text = row[query_col]
            if day is None or not text:
                skipped += 1
                continue
            eid = index.get(text)
            if eid is None:
                eid = len(texts)
                index[text] = eid
                texts.append(text)
            per_day.setdefault(day, []).append(eid)
    days = sorted(per_day)
    events = [np.array(per_day[d], dtype=np.int64) for d in days]
    return QueryLog(texts, days, events, skipped)
