"""Equal-memory benchmark harness: metrics, budget accounting, experiments.

Budgets are expressed in KB at 4 bytes per bucket.  Every estimator is sized
to fit the bucket budget: the counter grid gets width*depth buckets, exact
heavy-hitter slots cost double, and the learned sketch splits its budget
between stored ids and bucket counters through the ratio c.  Baseline
families run small hyperparameter grids (depths, heavy slots) mirroring the
tuned-baseline protocol; each grid member reports under its own label.

Streams replay in checkpoint chunks; after each chunk the per-element and
frequency-weighted absolute errors are measured over the ids that appeared
in that chunk, against true counts accumulated from the stream start.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, fields

import numpy as np

from .classify import DecisionTree, train_bucket_classifier
from .core import StreamPrefix
from .objective import evaluate
from .sketches import CountMinSketch, LearnedCMS, OptHashSketch
from .solvers import BcdConfig, bcd_optimize, dp_optimize
from .solvers.dp import _CACHE_CELLS
from .synthgen import SynthConfig, gen_stream, gen_universe, gen_zipf_stream


def avg_abs_error(true_freqs, estimates) -> float:
    """Mean absolute estimation error per element."""
    true_freqs = np.asarray(true_freqs, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    if len(true_freqs) == 0 or len(true_freqs) != len(estimates):
        raise ValueError("need nonempty aligned vectors")
    return float(np.abs(true_freqs - estimates).mean())


def expected_magnitude_error(true_freqs, estimates) -> float:
    """Absolute error weighted by each element's true frequency share."""
    true_freqs = np.asarray(true_freqs, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    if len(true_freqs) == 0 or len(true_freqs) != len(estimates):
        raise ValueError("need nonempty aligned vectors")
    total = true_freqs.sum()
    if total <= 0:
        raise ValueError("true frequencies are all zero")
    return float((true_freqs * np.abs(true_freqs - estimates)).sum() / total)


def budget_to_buckets(memory_kb: float) -> int:
    """KB to 4-byte buckets."""
    if memory_kb <= 0:
        raise ValueError("memory budget must be positive")
    return int(memory_kb * 1000 / 4)


def split_budget(b_total: int, c: float):
    """(stored ids, bucket counters) split of a bucket budget by ratio c."""
    if c <= 0:
        raise ValueError("ratio c must be positive")
    n_ids = int(b_total / (1 + c))
    return n_ids, b_total - n_ids


def weighted_subsample(rng, freqs, k: int) -> np.ndarray:
    """Positions of k ids drawn without replacement, probability ~ frequency."""
    freqs = np.asarray(freqs, dtype=np.float64)
    if k >= len(freqs):
        return np.arange(len(freqs))
    keys = np.log(rng.random(len(freqs))) / freqs
    return np.sort(np.argsort(keys)[-k:])


@dataclass
class ErrorReport:
    """One aggregated measurement row."""

    estimator: str
    memory_kb: float
    checkpoint: int
    avg_abs: float
    avg_abs_std: float
    exp_mag: float
    exp_mag_std: float
    est_err: float
    sim_err: float
    wall_time_s: float
    seed: int
    config_hash: str
    split: str = "all"
    overall: float = 0.0


CSV_COLUMNS = [
    "estimator",
    "memory_kb",
    "checkpoint",
    "avg_abs",
    "avg_abs_std",
    "exp_mag",
    "exp_mag_std",
    "est_err",
    "sim_err",
    "wall_time_s",
    "seed",
    "config_hash",
]


@dataclass
class ExperimentConfig:
    generator: str = "synth"  # synth | zipf | log
    budgets_kb: tuple = (4.0,)
    estimators: tuple = ("cms", "lcms", "opthash")
    seed: int = 0
    repetitions: int = 5
    lam: float = 0.5
    ratio_c: float = 0.03
    mode: str = "static"
    checkpoints: int = 5
    groups: int = 10
    group_base: int = 2
    feature_dim: int = 2
    prefix_fraction: float = 0.5
    stream_multiple: int = 10
    zipf_n: int = 10_000
    zipf_s: float = 1.0
    zipf_len: int = 1_000_000
    log_path: str | None = None
    cms_depths: tuple = (1, 2, 4, 6)
    lcms_depths: tuple = (1, 2, 4, 6)
    lcms_heavy: tuple = (10, 100, 1000, 10000)
    solver: str = "bcd"
    bcd_iters: int = 8
    bcd_restarts: int = 1
    bcd_init: str = "dp-warm-start"
    tree_depth: int | None = 16
    timing: bool = False

    def config_hash(self) -> str:
        payload = {f.name: getattr(self, f.name) for f in fields(self)}
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


class _Dataset:
    """One repetition's data: prefix, checkpointed remainder, features, truth."""

    def __init__(self, prefix_events, rest_events, checkpoints, feats, rep_seed):
        self.prefix_events = prefix_events
        self.chunks = np.array_split(rest_events, checkpoints)
        self.feats = feats  # (|U|, p) or None
        self.rep_seed = rep_seed
        size = int(max(prefix_events.max(), rest_events.max())) + 1
        self.true_counts = np.zeros(size, dtype=np.int64)
        totals = np.bincount(
            np.concatenate([prefix_events, rest_events]), minlength=size
        )
        order = np.lexsort((np.arange(size), -totals))
        self.by_true_freq = order  # ids sorted by descending true count
        self.prefix = StreamPrefix.from_id_events(
            prefix_events,
            self.feats if self.feats is not None else np.zeros((size, 1)),
        )


def _make_dataset(cfg: ExperimentConfig, rep_seed: int) -> _Dataset:
    if cfg.generator == "synth":
        scfg = SynthConfig(
            groups=cfg.groups,
            group_base=cfg.group_base,
            feature_dim=cfg.feature_dim,
            prefix_fraction=cfg.prefix_fraction,
            seed=rep_seed,
        )
        universe = gen_universe(scfg)
        prefix_len = scfg.default_prefix_len
        prefix_events = gen_stream(universe, scfg, prefix_len, prefix_mode=True)
        rest_events = gen_stream(
            universe, scfg, cfg.stream_multiple * prefix_len, prefix_mode=False
        )
        return _Dataset(prefix_events, rest_events, cfg.checkpoints, universe.feats, rep_seed)
    if cfg.generator == "zipf":
        events = gen_zipf_stream(cfg.zipf_n, cfg.zipf_s, cfg.zipf_len, rep_seed)
        split = max(len(events) // (cfg.stream_multiple + 1), 1)
        return _Dataset(events[:split], events[split:], cfg.checkpoints, None, rep_seed)
    if cfg.generator == "log":
        from .classify import fit_pipeline
        from .synthgen import load_query_log

        if not cfg.log_path:
            raise ValueError("log generator needs log_path")
        log = load_query_log(cfg.log_path)
        if len(log.day_events) < 2:
            raise ValueError("query log must span at least two days")
        prefix_events = log.day_events[0]
        rest = np.concatenate(log.day_events[1:])
        pipeline = fit_pipeline([log.texts[i] for i in prefix_events])
        feats = pipeline.transform(log.texts)
        ds = _Dataset(prefix_events, rest, len(log.day_events) - 1, feats, rep_seed)
        ds.chunks = log.day_events[1:]  # calendar days, not equal slices
        return ds
    raise ValueError(f"unknown generator: {cfg.generator!r}")


def _variants(cfg: ExperimentConfig, b_total: int):
    out = []
    for name in cfg.estimators:
        if name == "cms":
            out.extend(("cms", f"cms_d{d}", {"depth": d}) for d in cfg.cms_depths)
        elif name == "lcms":
            for d in cfg.lcms_depths:
                for h in cfg.lcms_heavy:
                    if 2 * h <= b_total:
                        out.append(("lcms", f"lcms_d{d}_h{h}", {"depth": d, "heavy": h}))
        elif name == "opthash":
            out.append(("opthash", "opthash", {}))
        else:
            raise ValueError(f"unknown estimator: {name!r}")
    return out


def _train_opthash(cfg: ExperimentConfig, ds: _Dataset, b_total: int):
    if ds.feats is None:
        raise ValueError("the learned sketch needs element features")
    n_ids, b = split_budget(b_total, cfg.ratio_c)
    prefix = ds.prefix
    rng = np.random.Generator(np.random.PCG64([ds.rep_seed, 17]))
    pos = weighted_subsample(rng, prefix.freqs, n_ids)
    sub = StreamPrefix.from_counts(prefix.ids[pos], prefix.freqs[pos], prefix.feats[pos])

    if cfg.solver == "dp":
        scheme = dp_optimize(sub, b)
    elif cfg.solver == "bcd":
        init = cfg.bcd_init
        if init == "dp-warm-start" and (sub.n + 1) ** 2 > _CACHE_CELLS:
            init = "sorted-blocks"  # exact DP table too large at this scale
        bcfg = BcdConfig(
            lam=cfg.lam,
            max_iters=cfg.bcd_iters,
            restarts=cfg.bcd_restarts,
            init=init,
            seed=ds.rep_seed,
        )
        scheme, _ = bcd_optimize(sub, b, bcfg)
    else:
        raise ValueError(f"unknown solver: {cfg.solver!r}")

    clf = DecisionTree(max_depth=cfg.tree_depth)
    clf, _ = train_bucket_classifier(sub, scheme, clf, seed=ds.rep_seed)
    sketch = OptHashSketch.build(scheme, sub, clf, mode=cfg.mode, seed=ds.rep_seed)
    value = evaluate(scheme, sub, cfg.lam)
    return sketch, value


def _run_cell(cfg: ExperimentConfig, kind, params, b_total: int, ds: _Dataset):
    """Build one estimator, replay the remainder, measure per checkpoint."""
    started = time.perf_counter() if cfg.timing else 0.0
    est_err = sim_err = 0.0
    cum = ds.true_counts.copy()
    cum += np.bincount(ds.prefix_events, minlength=len(cum))

    if kind == "cms":
        depth = params["depth"]
        sk = CountMinSketch(max(b_total // depth, 1), depth, seed=ds.rep_seed)
        sk.update_many(ds.prefix_events)
    elif kind == "lcms":
        heavy = ds.by_true_freq[: params["heavy"]]
        sk = LearnedCMS(heavy, b_total, params["heavy"], params["depth"], seed=ds.rep_seed)
        sk.update_many(ds.prefix_events)
    else:
        sk, value = _train_opthash(cfg, ds, b_total)
        est_err, sim_err = value.est, value.sim

    assert sk.memory_buckets <= b_total, "estimator exceeds its bucket budget"

    rows = []
    for t, chunk in enumerate(ds.chunks, start=1):
        if kind == "opthash":
            if cfg.mode == "static":
                sk.update_many_static(chunk)
            else:
                for eid in chunk:
                    sk.update(int(eid), features=ds.feats[eid])
        else:
            sk.update_many(chunk)
        cum += np.bincount(chunk, minlength=len(cum))

        uniq = np.unique(chunk)
        true = cum[uniq]
        if kind == "opthash":
            est = sk.query_many(uniq, features=ds.feats[uniq])
        else:
            est = sk.query_many(uniq)
        rows.append(
            (t, avg_abs_error(true, est), expected_magnitude_error(true, est))
        )
    elapsed = time.perf_counter() - started if cfg.timing else 0.0
    return rows, est_err, sim_err, elapsed


def run_experiment(cfg: ExperimentConfig) -> list:
    """All (variant, budget, checkpoint) rows, aggregated over repetitions."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.repetitions)
    rep_seeds = [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]
    datasets = [_make_dataset(cfg, s) for s in rep_seeds]
    chash = cfg.config_hash()

    reports = []
    for kb in cfg.budgets_kb:
        b_total = budget_to_buckets(kb)
        for kind, label, params in _variants(cfg, b_total):
            cells = [_run_cell(cfg, kind, params, b_total, ds) for ds in datasets]
            n_checkpoints = len(cells[0][0])
            wall = float(np.mean([c[3] for c in cells]))
            for t in range(n_checkpoints):
                avg = np.array([c[0][t][1] for c in cells])
                mag = np.array([c[0][t][2] for c in cells])
                reports.append(
                    ErrorReport(
                        estimator=label,
                        memory_kb=kb,
                        checkpoint=t + 1,
                        avg_abs=float(avg.mean()),
                        avg_abs_std=float(avg.std(ddof=1)) if len(avg) > 1 else 0.0,
                        exp_mag=float(mag.mean()),
                        exp_mag_std=float(mag.std(ddof=1)) if len(mag) > 1 else 0.0,
                        est_err=float(np.mean([c[1] for c in cells])),
                        sim_err=float(np.mean([c[2] for c in cells])),
                        wall_time_s=wall,
                        seed=cfg.seed,
                        config_hash=chash,
                    )
                )
    return reports


def write_report_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in reports:
            vals = [str(getattr(r, col)) for col in CSV_COLUMNS]
            fh.write(",".join(vals) + "\n")
