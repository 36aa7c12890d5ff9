"""Command line entry points.

Subcommands: ``synth`` emits universe/stream files, ``train`` learns a
scheme and writes a sketch file, ``replay`` updates a saved sketch from a
stream and answers queries, ``bench`` runs an experiment config to CSV, and
``export-milp`` writes the exact optimization model as an LP file.

Everything is seeded; identical flags reproduce identical files byte for
byte.  Timing measurement is opt-in (``bench --timing``) because measured
wall time is the one field that cannot be reproducible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench as bench_mod
from .classify import DecisionTree, NearestCentroid, train_bucket_classifier
from .core import (
    StreamPrefix,
    read_element_table,
    read_stream,
    rng_from_seed,
    write_element_table,
    write_stream,
)
from .objective import evaluate
from .sketches import (
    CountMinSketch,
    LearnedCMS,
    OptHashSketch,
    load_sketch,
    save_sketch,
)
from .solvers import BcdConfig, bcd_optimize, dp_optimize, export_milp
from .synthgen import SynthConfig, gen_stream, gen_universe


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate a synthetic universe and streams")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--groups", type=int, default=10)
    p.add_argument("--group-base", type=int, default=2)
    p.add_argument("--feature-dim", type=int, default=2)
    p.add_argument("--g0", type=float, default=0.5, help="prefix-eligible fraction")
    p.add_argument("--prefix-len", type=int, default=None)
    p.add_argument("--stream-len", type=int, default=None)
    p.add_argument("--out-universe", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--out-stream", required=True)
    p.set_defaults(func=_cmd_synth)


def _cmd_synth(args):
    cfg = SynthConfig(
        groups=args.groups,
        group_base=args.group_base,
        feature_dim=args.feature_dim,
        prefix_fraction=args.g0,
        seed=args.seed,
    )
    universe = gen_universe(cfg)
    prefix_len = args.prefix_len or cfg.default_prefix_len
    stream_len = args.stream_len or 10 * prefix_len
    prefix = gen_stream(universe, cfg, prefix_len, prefix_mode=True)
    rest = gen_stream(universe, cfg, stream_len, prefix_mode=False)
    write_element_table(args.out_universe, universe.ids, universe.feats)
    write_stream(args.out_prefix, prefix, universe.feats)
    write_stream(args.out_stream, rest, universe.feats)
    print(
        f"universe={universe.size} prefix_events={prefix_len} stream_events={stream_len}"
    )
    return 0


def _add_train(sub):
    p = sub.add_parser("train", help="build a sketch from a prefix stream file")
    p.add_argument("--prefix", required=True, help="prefix stream file")
    p.add_argument("--estimator", choices=["cms", "lcms", "opthash"], required=True)
    p.add_argument("--mode", choices=["static", "adaptive"], default="static")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--buckets-kb", type=float, required=True)
    p.add_argument("--ratio-c", type=float, default=0.03)
    p.add_argument("--depth", type=int, default=3, help="counter grid depth")
    p.add_argument("--b-heavy", type=int, default=10, help="exact heavy slots (lcms)")
    p.add_argument("--oracle", default=None, help="file of heavy ids, one per line")
    p.add_argument("--solver", choices=["bcd", "dp"], default="bcd")
    p.add_argument(
        "--init",
        choices=["random", "sorted-blocks", "heavy-hitter", "dp-warm-start"],
        default="dp-warm-start",
    )
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument(
        "--classifier", choices=["tree", "centroid"], default="tree"
    )
    p.add_argument("--tree-depth", type=int, default=16)
    p.add_argument("--out", required=True, help="sketch output file")
    p.set_defaults(func=_cmd_train)


def _cmd_train(args):
    events, feats = read_stream(args.prefix)
    b_total = bench_mod.budget_to_buckets(args.buckets_kb)

    if args.estimator == "cms":
        sk = CountMinSketch(max(b_total // args.depth, 1), args.depth, seed=args.seed)
        sk.update_many(events)
    elif args.estimator == "lcms":
        if args.oracle:
            heavy = np.loadtxt(args.oracle, dtype=np.int64, ndmin=1)
        else:
            counts = np.bincount(events)
            order = np.lexsort((np.arange(len(counts)), -counts))
            heavy = order[: args.b_heavy]
        sk = LearnedCMS(heavy, b_total, args.b_heavy, args.depth, seed=args.seed)
        sk.update_many(events)
    else:
        table = np.zeros((int(events.max()) + 1, feats.shape[1]))
        table[events] = feats
        prefix = StreamPrefix.from_id_events(events, table)
        n_ids, b = bench_mod.split_budget(b_total, args.ratio_c)
        rng = rng_from_seed(args.seed)
        pos = bench_mod.weighted_subsample(rng, prefix.freqs, n_ids)
        sub = StreamPrefix.from_counts(
            prefix.ids[pos], prefix.freqs[pos], prefix.feats[pos]
        )
        if args.solver == "dp":
            scheme = dp_optimize(sub, b)
        else:
            cfg = BcdConfig(
                lam=args.lam,
                max_iters=args.max_iters,
                restarts=args.restarts,
                init=args.init,
                seed=args.seed,
            )
            scheme, _ = bcd_optimize(sub, b, cfg)
        clf = (
            DecisionTree(max_depth=args.tree_depth)
            if args.classifier == "tree"
            else NearestCentroid()
        )
        clf, acc = train_bucket_classifier(sub, scheme, clf, seed=args.seed)
        sk = OptHashSketch.build(scheme, sub, clf, mode=args.mode, seed=args.seed)
        value = evaluate(scheme, sub, args.lam)
        print(
            f"stored_ids={sub.n} buckets={b} est_err={value.est:.6g} "
            f"sim_err={value.sim:.6g} holdout_acc={acc:.3f}"
        )
    save_sketch(sk, args.out)
    print(f"wrote {args.out}")
    return 0


def _add_replay(sub):
    p = sub.add_parser("replay", help="update a saved sketch and answer queries")
    p.add_argument("--sketch", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--queries", default=None, help="id file; default: stream ids")
    p.add_argument("--out", required=True, help="CSV of id,estimate")
    p.add_argument("--save-sketch", default=None, help="write updated sketch here")
    p.set_defaults(func=_cmd_replay)


def _cmd_replay(args):
    sk = load_sketch(args.sketch)
    events, feats = read_stream(args.stream)

    table = np.zeros((int(events.max()) + 1, feats.shape[1]))
    table[events] = feats
    if isinstance(sk, OptHashSketch):
        if sk.mode == "static":
            sk.update_many_static(events)
        else:
            for eid in events:
                sk.update(int(eid), features=table[eid])
    else:
        sk.update_many(events)

    if args.queries:
        qids = np.loadtxt(args.queries, dtype=np.int64, ndmin=1)
    else:
        qids = np.unique(events)
    if isinstance(sk, OptHashSketch):
        qf = table[np.minimum(qids, len(table) - 1)]
        est = sk.query_many(qids, features=qf)
    else:
        est = sk.query_many(qids)
    with open(args.out, "w") as fh:
        fh.write("id,estimate\n")
        for eid, val in zip(qids, est):
            fh.write(f"{int(eid)},{val}\n")
    if args.save_sketch:
        save_sketch(sk, args.save_sketch)
    print(f"wrote {args.out}")
    return 0


def _add_bench(sub):
    p = sub.add_parser("bench", help="run an experiment and write a CSV report")
    p.add_argument("--config", default=None, help="key=value file of config overrides")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--buckets-kb", required=True, help="comma-separated KB budgets")
    p.add_argument("--ratio-c", type=float, default=None)
    p.add_argument("--estimator", required=True, help="comma list: cms,lcms,opthash")
    p.add_argument("--mode", choices=["static", "adaptive"], default=None)
    p.add_argument("--generator", choices=["synth", "zipf", "log"], default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--checkpoints", type=int, default=None)
    p.add_argument("--groups", type=int, default=None)
    p.add_argument("--g0", type=float, default=None)
    p.add_argument("--log-path", default=None)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)


def _parse_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


_CONFIG_INT = {"repetitions", "checkpoints", "groups", "group_base", "feature_dim",
               "stream_multiple", "zipf_n", "zipf_len", "bcd_iters", "bcd_restarts"}
_CONFIG_FLOAT = {"lam", "ratio_c", "prefix_fraction", "zipf_s"}
_CONFIG_TUPLE = {"budgets_kb", "estimators", "cms_depths", "lcms_depths", "lcms_heavy"}


def _coerce_config(overrides: dict) -> dict:
    out = {}
    for key, val in overrides.items():
        if key in _CONFIG_INT:
            out[key] = int(val)
        elif key in _CONFIG_FLOAT:
            out[key] = float(val)
        elif key in _CONFIG_TUPLE:
            parts = [v for v in val.split(",") if v]
            if key == "budgets_kb":
                out[key] = tuple(float(v) for v in parts)
            elif key in ("cms_depths", "lcms_depths", "lcms_heavy"):
                out[key] = tuple(int(v) for v in parts)
            else:
                out[key] = tuple(parts)
        else:
            out[key] = val
    return out


def _cmd_bench(args):
    overrides = {}
    if args.config:
        overrides.update(_coerce_config(_parse_config_file(args.config)))
    overrides["seed"] = args.seed
    overrides["budgets_kb"] = tuple(float(v) for v in args.buckets_kb.split(","))
    overrides["estimators"] = tuple(v for v in args.estimator.split(",") if v)
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.ratio_c is not None:
        overrides["ratio_c"] = args.ratio_c
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.generator is not None:
        overrides["generator"] = args.generator
    if args.reps is not None:
        overrides["repetitions"] = args.reps
    if args.checkpoints is not None:
        overrides["checkpoints"] = args.checkpoints
    if args.groups is not None:
        overrides["groups"] = args.groups
    if args.g0 is not None:
        overrides["prefix_fraction"] = args.g0
    if args.log_path is not None:
        overrides["log_path"] = args.log_path
    if args.timing:
        overrides["timing"] = True

    cfg = bench_mod.ExperimentConfig(**overrides)
    reports = bench_mod.run_experiment(cfg)
    bench_mod.write_report_csv(reports, args.out)
    print(f"wrote {args.out} ({len(reports)} rows)")
    return 0


def _add_export(sub):
    p = sub.add_parser("export-milp", help="write the exact model as an LP file")
    p.add_argument("--prefix", required=True, help="prefix stream file")
    p.add_argument("--buckets", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--big-m", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)


def _cmd_export(args):
    events, feats = read_stream(args.prefix)
    table = np.zeros((int(events.max()) + 1, feats.shape[1]))
    table[events] = feats
    prefix = StreamPrefix.from_id_events(events, table)
    model = export_milp(prefix, args.buckets, args.lam, args.big_m, path=args.out)
    print(
        f"wrote {args.out}: {model.num_variables} variables, "
        f"{model.num_constraints} constraint rows"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="opthash",
        description="learned hashing schemes for streaming frequency estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth(sub)
    _add_train(sub)
    _add_replay(sub)
    _add_bench(sub)
    _add_export(sub)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
