"""Repeated train/test benchmark of the plain and the weighted forest.

Each repetition draws a random split, fits one forest on the training part,
trains weights on the training pairs for every (groups, lambda) setting and
scores both models on the test part. Output files are plain CSV plus a
``key: value`` manifest; only the manifest carries a timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import SurvivalDataset, admissible_pairs, load_csv, load_veteran, split_indices
from .forest import GroupedForest, fit_forest
from .metrics import c_index, check_policy, event_grid
from .tree import normalize_rule
from .weights import build_pair_differences, combine_values, optimize_weights_qp, sample_constraints, source_matrix

__all__ = [
    "DEFAULT_LAMBDAS",
    "ExperimentConfig",
    "BenchmarkReport",
    "load_dataset",
    "repetition_seeds",
    "run_repetition",
    "run_benchmark",
    "run_sweep",
    "write_benchmark",
    "write_sweep",
    "REPETITION_COLUMNS",
    "SUMMARY_COLUMNS",
    "SWEEP_COLUMNS",
]

DEFAULT_LAMBDAS = (0.001, 0.01, 0.1, 1.0, 10.0)
SWEEP_AXES = ("trees", "groups", "constraints", "lambda")

REPETITION_COLUMNS = [
    "rep", "split_seed", "forest_seed", "constraint_seed", "n_trees", "groups", "group_size",
    "lambda", "constraints", "n_pairs", "c_rsf", "c_wrsf", "train_c_rsf", "train_c_wrsf",
    "qp_objective", "qp_converged",
]
SUMMARY_COLUMNS = ["model", "groups", "lambda", "n_reps", "mean", "std", "median"]
SWEEP_COLUMNS = ["axis", "value", "rep", "lambda", "c_rsf", "c_wrsf"]


@dataclass(frozen=True)
class ExperimentConfig:
    data: str = "veteran"
    time_col: str = "time"
    event_col: str = "status"
    features: Optional[tuple] = None
    trees: int = 100
    rule: str = "logrank"
    min_deaths: int = 3
    mtry: Optional[int] = None
    groups: tuple = ()
    lambdas: tuple = DEFAULT_LAMBDAS
    constraints: Optional[int] = None
    time_policy: str = "sample"
    reps: int = 20
    train_frac: float = 0.75
    seed: int = 0
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "rule", normalize_rule(self.rule))
        object.__setattr__(self, "groups", tuple(int(g) for g in self.groups) or (self.trees,))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))
        check_policy(self.time_policy)
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must lie in (0, 1)")
        if not self.lambdas or any(not v > 0 for v in self.lambdas):
            raise ValueError("lambda grid must be nonempty and positive")
        if self.trees < 1:
            raise ValueError("trees must be at least 1")
        for g in self.groups:
            if g < 1 or self.trees % g:
                raise ValueError(f"groups={g} does not divide trees={self.trees}")
        if self.constraints is not None and self.constraints < 1:
            raise ValueError("constraints must be a positive integer or 'all'")
        if self.min_deaths < 1:
            raise ValueError("min_deaths must be positive")


def load_dataset(cfg: ExperimentConfig) -> SurvivalDataset:
    if cfg.data == "veteran":
        return load_veteran()
    return load_csv(cfg.data, cfg.time_col, cfg.event_col, cfg.features)


def repetition_seeds(master_seed: int, rep: int) -> dict:
    split_seed, forest_seed, constraint_seed = (
        int(v) for v in np.random.SeedSequence(master_seed, spawn_key=(rep,)).generate_state(3)
    )
    return {"split_seed": split_seed, "forest_seed": forest_seed, "constraint_seed": constraint_seed}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def run_repetition(ds: SurvivalDataset, cfg: ExperimentConfig, rep: int,
                   n_trees: Optional[int] = None, groups: Optional[Sequence[int]] = None,
                   constraints: Sequence[Optional[int]] = (None,), lambdas: Optional[Sequence[float]] = None,
                   return_weights: bool = False):
    """All (groups, constraints, lambda) records of one repetition.

    A single forest is fitted per repetition and shared by every setting.
    """
    n_trees = cfg.trees if n_trees is None else n_trees
    groups = cfg.groups if groups is None else tuple(groups)
    lambdas = cfg.lambdas if lambdas is None else tuple(lambdas)
    seeds = repetition_seeds(cfg.seed, rep)
    try:
        train_idx, test_idx = split_indices(ds.n, cfg.train_frac, seeds["split_seed"])
        train, test = ds.subset(train_idx), ds.subset(test_idx)
        forest = fit_forest(train, n_trees, cfg.rule, cfg.min_deaths, cfg.mtry, seed=seeds["forest_seed"])
        grid = event_grid(train) if cfg.time_policy == "grid" else None
        V_train = source_matrix(forest, train, cfg.time_policy, grid)
        V_test = source_matrix(forest, test, cfg.time_policy, grid)
        train_pairs = admissible_pairs(train)
        test_pairs = admissible_pairs(test)
        c_rsf = c_index(combine_values(V_test), test, pairs=test_pairs).c_index
        train_c_rsf = c_index(combine_values(V_train), train, pairs=train_pairs).c_index
    except Exception as exc:
        raise RuntimeError(f"repetition {rep} (seeds {seeds}) failed: {exc}") from exc

    records, weights = [], {}
    for G in groups:
        sources = forest if G == n_trees else GroupedForest(forest, G)
        Vg_train = sources.reduce_values(V_train)
        Vg_test = sources.reduce_values(V_test)
        for K in constraints:
            pairs = train_pairs if K is None else sample_constraints(train_pairs, K, seeds["constraint_seed"])
            D = build_pair_differences(sources, train, pairs, cfg.time_policy, grid, values=Vg_train)
            for lam in lambdas:
                sol = optimize_weights_qp(D, lam)
                records.append({
                    "rep": rep,
                    **seeds,
                    "n_trees": n_trees,
                    "groups": G,
                    "group_size": n_trees // G,
                    "lambda": float(lam),
                    "constraints": "all" if K is None else K,
                    "n_pairs": len(pairs),
                    "c_rsf": c_rsf,
                    "c_wrsf": c_index(combine_values(Vg_test, sol.weights), test, pairs=test_pairs).c_index,
                    "train_c_rsf": train_c_rsf,
                    "train_c_wrsf": c_index(combine_values(Vg_train, sol.weights), train, pairs=train_pairs).c_index,
                    "qp_objective": sol.objective,
                    "qp_converged": sol.converged,
                })
                if return_weights:
                    weights[(G, K, float(lam))] = sol.weights
    return (records, weights) if return_weights else records


def _rep_job(args):
    ds, cfg, rep, kwargs = args
    return run_repetition(ds, cfg, rep, **kwargs)


def _map_reps(ds, cfg, kwargs_list):
    jobs = [(ds, cfg, rep, kw) for rep, kw in kwargs_list]
    if cfg.workers <= 1:
        return [_rep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_rep_job, jobs))


def _stats(values):
    values = [float(v) for v in values]
    std = statistics.stdev(values) if len(values) > 1 else None
    return statistics.fmean(values), std, statistics.median(values)


def _best_lambda(records, key=("groups",)):
    """Lambda with the highest mean test C of the weighted model per setting."""
    by_setting: dict = {}
    for r in records:
        by_setting.setdefault(tuple(r[k] for k in key), {}).setdefault(r["lambda"], []).append(r["c_wrsf"])
    # ties go to the smaller lambda
    return {
        s: min(per_lam, key=lambda lam: (-statistics.fmean(per_lam[lam]), lam))
        for s, per_lam in by_setting.items()
    }


@dataclass
class BenchmarkReport:
    config: ExperimentConfig
    records: list
    summary: list
    best_lambda: dict
    weights_run: dict = field(default_factory=dict)

    def mean(self, model: str, groups: Optional[int] = None) -> float:
        return self._row(model, groups)["mean"]

    def std(self, model: str, groups: Optional[int] = None):
        return self._row(model, groups)["std"]

    def _row(self, model, groups):
        groups = self.config.groups[0] if groups is None else groups
        for row in self.summary:
            if row["model"] == model and row["groups"] == groups:
                return row
        raise KeyError((model, groups))

    def series(self, model: str, groups: Optional[int] = None) -> list:
        """Per-repetition test C-index at the selected lambda."""
        groups = self.config.groups[0] if groups is None else groups
        lam = self.best_lambda[(groups,)]
        key = "c_rsf" if model == "RSF" else "c_wrsf"
        return [r[key] for r in self.records if r["groups"] == groups and r["lambda"] == lam]


def summarize(records, groups_list) -> tuple:
    best = _best_lambda(records)
    summary = []
    for G in groups_list:
        lam = best[(G,)]
        chosen = [r for r in records if r["groups"] == G and r["lambda"] == lam]
        for model, key in (("RSF", "c_rsf"), ("WRSF", "c_wrsf")):
            mean, std, median = _stats(r[key] for r in chosen)
            summary.append({
                "model": model, "groups": G, "lambda": lam if model == "WRSF" else None,
                "n_reps": len(chosen), "mean": mean, "std": std, "median": median,
            })
    return summary, best


def run_benchmark(cfg: ExperimentConfig, ds: Optional[SurvivalDataset] = None) -> BenchmarkReport:
    ds = load_dataset(cfg) if ds is None else ds
    kw = {"constraints": (cfg.constraints,)}
    results = _map_reps(ds, cfg, [(rep, kw) for rep in range(cfg.reps)])
    records = [r for rep_records in results for r in rep_records]
    summary, best = summarize(records, cfg.groups)
    G0 = cfg.groups[0]
    _, weights = run_repetition(ds, cfg, 0, groups=(G0,), constraints=(cfg.constraints,),
                                lambdas=(best[(G0,)],), return_weights=True)
    w = next(iter(weights.values()))
    return BenchmarkReport(cfg, records, summary, best, {"rep": 0, "groups": G0, "lambda": best[(G0,)], "weights": w})


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _config_lines(cfg: ExperimentConfig) -> list:
    lines = []
    for k, v in asdict(cfg).items():
        if isinstance(v, (tuple, list)):
            v = " ".join(_fmt(x) for x in v)
        lines.append(f"config.{k}: {_fmt(v)}")
    return lines


def write_benchmark(report: BenchmarkReport, out=None) -> dict:
    """Write ``repetitions.csv``, ``summary.csv``, ``weights.csv`` and ``manifest.txt``."""
    out = Path(report.config.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    w = report.weights_run["weights"]
    order = np.argsort(-w, kind="stable")
    weight_rows = [{"rank": k + 1, "source": int(q), "weight": float(w[q])} for k, q in enumerate(order)]
    files = {
        "repetitions.csv": _csv_text(report.records, REPETITION_COLUMNS),
        "summary.csv": _csv_text(report.summary, SUMMARY_COLUMNS),
        "weights.csv": _csv_text(weight_rows, ["rank", "source", "weight"]),
    }
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = [
        "kind: benchmark",
        f"created: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        *_config_lines(report.config),
        *(f"best_lambda.groups_{s[0]}: {_fmt(lam)}" for s, lam in sorted(report.best_lambda.items())),
        f"weights_run: rep={report.weights_run['rep']} groups={report.weights_run['groups']} "
        f"lambda={_fmt(report.weights_run['lambda'])}",
        "note: lambda is selected on the test folds (optimistic); per-lambda rows are in repetitions.csv",
        "note: std is the sample standard deviation and is empty when reps=1",
        *(f"sha256.{name}: {hashlib.sha256(text.encode()).hexdigest()}" for name, text in files.items()),
    ]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return {name: out / name for name in [*files, "manifest.txt"]}


def _parse_axis_values(axis: str, values, cfg: ExperimentConfig) -> list:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if not values:
        raise ValueError("no sweep values given")
    parsed = []
    for v in values:
        if axis == "constraints" and str(v).lower() == "all":
            parsed.append(None)
            continue
        if axis == "lambda":
            v = float(v)
            if not v > 0:
                raise ValueError(f"lambda must be positive, got {v}")
        else:
            v = int(v)
            if v < 1:
                raise ValueError(f"{axis} values must be positive, got {v}")
        parsed.append(v)
    if axis == "groups":
        for g in parsed:
            if cfg.trees % g:
                raise ValueError(f"groups={g} does not divide trees={cfg.trees}")
    if axis == "trees":
        for q in parsed:
            for g in cfg.groups:
                if g != cfg.trees and q % g:
                    raise ValueError(f"groups={g} does not divide trees={q}")
    return parsed


def run_sweep(cfg: ExperimentConfig, axis: str, values, ds: Optional[SurvivalDataset] = None):
    """Per-repetition C-index of both models for every value on one axis.

    Returns ``(rows, records)``: ``rows`` hold one entry per (value, rep) at the
    lambda with the best mean weighted C-index for that value (for the lambda
    axis the value itself); ``records`` hold every evaluated setting.
    """
    values = _parse_axis_values(axis, values, cfg)
    ds = load_dataset(cfg) if ds is None else ds
    G0 = cfg.groups[0]
    jobs = []
    for rep in range(cfg.reps):
        if axis == "trees":
            for q in values:
                G = q if G0 == cfg.trees else G0
                jobs.append((rep, {"n_trees": q, "groups": (G,), "constraints": (cfg.constraints,)}))
        elif axis == "groups":
            jobs.append((rep, {"groups": tuple(values), "constraints": (cfg.constraints,)}))
        elif axis == "constraints":
            jobs.append((rep, {"groups": (G0,), "constraints": tuple(values)}))
        else:
            jobs.append((rep, {"groups": (G0,), "constraints": (cfg.constraints,), "lambdas": tuple(values)}))
    results = _map_reps(ds, cfg, jobs)
    records = [r for rr in results for r in rr]
    column = {"trees": "n_trees", "groups": "groups", "constraints": "constraints", "lambda": "lambda"}[axis]
    for r in records:
        r["axis"] = axis
        r["value"] = r[column]
    if axis == "lambda":
        chosen = records
    else:
        best = _best_lambda(records, key=("value",))
        chosen = [r for r in records if r["lambda"] == best[(r["value"],)]]
    order = {("all" if v is None else v): k for k, v in enumerate(values)}
    chosen = sorted(chosen, key=lambda r: (order[r["value"]], r["rep"]))
    rows = [{k: r[k] for k in SWEEP_COLUMNS} for r in chosen]
    return rows, records


def write_sweep(cfg: ExperimentConfig, axis: str, rows, records, out=None) -> dict:
    out = Path(cfg.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        f"sweep_{axis}.csv": _csv_text(rows, SWEEP_COLUMNS),
        f"sweep_{axis}_all.csv": _csv_text(records, ["axis", "value", *REPETITION_COLUMNS]),
    }
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = [
        "kind: sweep",
        f"axis: {axis}",
        f"created: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        *_config_lines(cfg),
        *(f"sha256.{name}: {hashlib.sha256(text.encode()).hexdigest()}" for name, text in files.items()),
    ]
    (out / f"sweep_{axis}_manifest.txt").write_text("\n".join(manifest) + "\n")
    return {name: out / name for name in files}
