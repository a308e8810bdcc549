"""Command line entry point: ``wrsf {fit,evaluate,benchmark,sweep,simulate}``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import benchmark as bench
from .dataset import admissible_pairs, simulate_proportional_hazards, split_indices
from .forest import GroupedForest, fit_forest, load_model, save_model
from .metrics import c_index, event_grid
from .weights import build_pair_differences, combine_values, optimize_weights_qp, sample_constraints, source_matrix

# flag name -> ExperimentConfig field
_KEYS = {
    "data": "data", "time_col": "time_col", "event_col": "event_col", "features": "features",
    "trees": "trees", "rule": "rule", "min_deaths": "min_deaths", "mtry": "mtry", "groups": "groups",
    "lambda": "lambdas", "constraints": "constraints", "time_policy": "time_policy", "reps": "reps",
    "train_frac": "train_frac", "seed": "seed", "workers": "workers", "out": "out",
}


def _constraints(v):
    return None if str(v).lower() == "all" else int(v)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with the same keys as the flags; flags win")
    p.add_argument("--data", help="CSV file, or 'veteran' for the bundled dataset")
    p.add_argument("--schema", help="JSON file with keys time, event and optionally features")
    p.add_argument("--time-col", dest="time_col")
    p.add_argument("--event-col", dest="event_col")
    p.add_argument("--features", nargs="+", help="feature columns (default: all others)")
    p.add_argument("--trees", type=int)
    p.add_argument("--rule", choices=["logrank", "conservation", "approx-logrank"])
    p.add_argument("--min-deaths", dest="min_deaths", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--groups", type=int, action="append", help="repeatable")
    p.add_argument("--lambda", dest="lambda", type=float, action="append", help="repeatable")
    p.add_argument("--constraints", type=_constraints, help="K or 'all'")
    p.add_argument("--time-policy", dest="time_policy", choices=["sample", "grid"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)


def _add_protocol(p):
    p.add_argument("--reps", type=int)
    p.add_argument("--train-frac", dest="train_frac", type=float)


def build_config(args) -> bench.ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        for k, v in json.loads(path.read_text()).items():
            key = k.replace("-", "_")
            if key == "schema":
                values.update(_read_schema(v))
                continue
            if key not in _KEYS:
                raise ValueError(f"{path}: unknown config key {k!r}")
            values[_KEYS[key]] = v
    if getattr(args, "schema", None):
        values.update(_read_schema(args.schema))
    for flag, field_name in _KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field_name] = v
    if "constraints" in values:
        values["constraints"] = _constraints(values["constraints"])
    allowed = {f.name for f in fields(bench.ExperimentConfig)}
    return bench.ExperimentConfig(**{k: v for k, v in values.items() if k in allowed})


def _read_schema(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"schema file not found: {path}")
    doc = json.loads(path.read_text())
    out = {}
    if "time" in doc:
        out["time_col"] = doc["time"]
    if "event" in doc:
        out["event_col"] = doc["event"]
    if "features" in doc:
        out["features"] = doc["features"]
    return out


def _dataset_hash(ds) -> str:
    h = hashlib.sha256()
    for a in (ds.X, ds.time, ds.event):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def cmd_fit(args) -> int:
    cfg = build_config(args)
    ds = bench.load_dataset(cfg)
    split = "full"
    if args.train_frac is not None:
        train_idx, _ = split_indices(ds.n, cfg.train_frac, cfg.seed)
        ds = ds.subset(train_idx)
        split = f"train_frac={cfg.train_frac} seed={cfg.seed}"
    forest = fit_forest(ds, cfg.trees, cfg.rule, cfg.min_deaths, cfg.mtry, seed=cfg.seed, n_jobs=cfg.workers)
    G = cfg.groups[0]
    weights = None
    sol = None
    grid = event_grid(ds) if cfg.time_policy == "grid" else None
    if args.model == "wrsf":
        sources = forest if G == cfg.trees else GroupedForest(forest, G)
        pairs = admissible_pairs(ds)
        if cfg.constraints is not None:
            pairs = sample_constraints(pairs, cfg.constraints, cfg.seed)
        D = build_pair_differences(sources, ds, pairs, cfg.time_policy, grid)
        sol = optimize_weights_qp(D, cfg.lambdas[0])
        weights = sol.weights
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"time_policy": cfg.time_policy, "lambda": cfg.lambdas[0] if weights is not None else None,
            "feature_names": list(ds.feature_names), "training_hash": _dataset_hash(ds),
            "grid": None if grid is None else [float(t) for t in grid]}
    save_model(out / "model.json", forest, weights, G if weights is not None else None, meta)
    manifest = [
        "kind: fit",
        f"created: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        f"model: {args.model}",
        f"data: {cfg.data}",
        f"split: {split}",
        f"n_samples: {ds.n}",
        f"training_hash: {meta['training_hash']}",
        f"trees: {forest.n_trees}",
        f"rule: {cfg.rule}",
        f"min_deaths: {cfg.min_deaths}",
        f"mtry: {forest.params['mtry']}",
        f"seed: {cfg.seed}",
        f"time_policy: {cfg.time_policy}",
    ]
    if sol is not None:
        manifest += [f"groups: {G}", f"lambda: {sol.lam!r}", f"qp_objective: {sol.objective!r}",
                     f"qp_converged: {str(sol.converged).lower()}"]
    (out / "fit_manifest.txt").write_text("\n".join(manifest) + "\n")
    print(f"wrote {out / 'model.json'} ({forest.n_trees} trees)")
    return 0


def cmd_evaluate(args) -> int:
    cfg = build_config(args)
    model_path = Path(args.model_file)
    if not model_path.exists():
        raise FileNotFoundError(f"model file not found: {model_path}")
    saved = load_model(model_path)
    ds = bench.load_dataset(cfg)
    if args.test_frac_seed is not None:
        _, test_idx = split_indices(ds.n, cfg.train_frac, args.test_frac_seed)
        ds = ds.subset(test_idx)
    policy = saved.metadata.get("time_policy", cfg.time_policy)
    grid = None
    if policy == "grid":
        # the grid is fixed at fit time so scores are comparable across datasets
        saved_grid = saved.metadata.get("grid")
        grid = event_grid(ds) if saved_grid is None else np.array(saved_grid, dtype=float)
    forest = saved.forest
    V = source_matrix(forest, ds, policy, grid)
    if args.oob:
        mask = forest.oob_mask(ds.n)
        if not mask.any(axis=1).all():
            raise ValueError("some samples are in-bag for every tree; no OOB estimate")
        acc = np.zeros(ds.n)
        for q in range(forest.n_trees):
            acc += np.where(mask[:, q], V[:, q], 0.0)
        values = acc / mask.sum(axis=1)
        reports = {"RSF-OOB": c_index(values, ds, policy, grid)}
    else:
        reports = {"RSF": c_index(combine_values(V), ds, policy, grid)}
        if saved.weights is not None:
            Vs = saved.sources.reduce_values(V)
            reports["WRSF"] = c_index(combine_values(Vs, saved.weights), ds, policy, grid)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["model", "c_index", "concordant", "admissible", "time_policy"])
    for name, r in reports.items():
        writer.writerow([name, repr(r.c_index), r.concordant, r.admissible, r.time_policy])
    return 0


def cmd_benchmark(args) -> int:
    cfg = build_config(args)
    report = bench.run_benchmark(cfg)
    paths = bench.write_benchmark(report)
    for row in report.summary:
        std = "" if row["std"] is None else f"{row['std']:.4f}"
        print(f"{row['model']:5s} G={row['groups']:<4d} mean={row['mean']:.4f} std={std} median={row['median']:.4f}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    rows, records = bench.run_sweep(cfg, args.axis, args.values)
    paths = bench.write_sweep(cfg, args.axis, rows, records)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_simulate(args) -> int:
    ds = simulate_proportional_hazards(args.n, args.m, censoring_rate=args.censoring, seed=args.seed)
    path = Path(args.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, "time", "status"])
        for x, t, e in zip(ds.X, ds.time, ds.event):
            writer.writerow([*(repr(float(v)) for v in x), repr(float(t)), int(e)])
    print(f"wrote {path} ({ds.n} rows, {int(ds.event.sum())} events)")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrsf", description="Random survival forests with trained tree weights")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a forest (and weights) and write a model file")
    _add_common(p)
    _add_protocol(p)
    p.add_argument("--model", choices=["rsf", "wrsf"], default="wrsf")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="C-index of a saved model on a dataset")
    _add_common(p)
    _add_protocol(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--oob", action="store_true", help="out-of-bag estimate on the training data")
    p.add_argument("--test-split-seed", dest="test_frac_seed", type=int,
                   help="evaluate only on the test part of the split with this seed")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="repeated random train/test comparison of RSF and WRSF")
    _add_common(p)
    _add_protocol(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="C-index as a function of trees, groups, constraints or lambda")
    _add_common(p)
    _add_protocol(p)
    p.add_argument("--axis", required=True, choices=list(bench.SWEEP_AXES))
    p.add_argument("--values", required=True, nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="write a synthetic proportional-hazards dataset")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--censoring", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"wrsf {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
