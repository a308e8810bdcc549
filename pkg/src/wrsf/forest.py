"""Random survival forests, tree groups and model files."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import stepfunction
from .dataset import SurvivalDataset, bootstrap_sample
from .stepfunction import StepFunction
from .tree import LeafEstimate, SurvivalTree, grow_tree, normalize_rule

__all__ = [
    "Forest",
    "GroupedForest",
    "fit_forest",
    "ensemble_chf",
    "oob_ensemble_chf",
    "group_trees",
    "tree_seeds",
    "save_model",
    "load_model",
    "SavedModel",
    "FORMAT_VERSION",
]

FORMAT_VERSION = 1


def tree_seeds(master_seed: int, q: int):
    """Bootstrap and growth seed sequences of tree ``q``."""
    return (
        np.random.SeedSequence(master_seed, spawn_key=(q, 0)),
        np.random.SeedSequence(master_seed, spawn_key=(q, 1)),
    )


class _Sources:
    """Shared evaluation of a list of hazard sources (trees or groups)."""

    n_sources: int

    def source_chfs(self, x) -> list:
        raise NotImplementedError

    def source_values(self, X, times) -> np.ndarray:
        """Array ``V[i, s] = H_s(times[i] | X[i])``."""
        raise NotImplementedError

    def source_grid_values(self, X, grid) -> np.ndarray:
        """Array ``V[i, s] = sum_t H_s(t | X[i])`` over ``t`` in ``grid``."""
        raise NotImplementedError


@dataclass(eq=False)
class Forest(_Sources):
    trees: list
    params: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_sources(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def oob_sets(self) -> list:
        return [t.oob for t in self.trees]

    def source_chfs(self, x) -> list:
        return [t.predict_chf(x) for t in self.trees]

    def source_values(self, X, times) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([t.hazard_at(X, times) for t in self.trees])

    def source_grid_values(self, X, grid) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        grid = np.asarray(grid, dtype=float)
        cols = []
        for t in self.trees:
            per_leaf = np.array([leaf.chf(grid).sum() for leaf in t.leaves])
            cols.append(per_leaf[t.apply_leaves(X)])
        return np.column_stack(cols)

    def reduce_values(self, V) -> np.ndarray:
        return np.asarray(V, dtype=float)

    def oob_mask(self, n: int) -> np.ndarray:
        """Boolean ``(n, Q)`` array, true where sample ``i`` is out of bag for tree ``q``."""
        mask = np.zeros((n, self.n_trees), dtype=bool)
        for q, t in enumerate(self.trees):
            mask[t.oob, q] = True
        return mask


@dataclass(eq=False)
class GroupedForest(_Sources):
    """Trees partitioned into ``n_groups`` contiguous blocks of equal size."""

    parent: Forest
    n_groups: int

    def __post_init__(self):
        Q = self.parent.n_trees
        if self.n_groups < 1 or Q % self.n_groups:
            raise ValueError(f"number of groups {self.n_groups} does not divide the tree count {Q}")

    @property
    def group_size(self) -> int:
        return self.parent.n_trees // self.n_groups

    @property
    def n_sources(self) -> int:
        return self.n_groups

    @property
    def n_features(self) -> int:
        return self.parent.n_features

    def members(self, k: int) -> range:
        g = self.group_size
        return range(k * g, (k + 1) * g)

    def group_of(self, q: int) -> int:
        return q // self.group_size

    def reduce_values(self, V) -> np.ndarray:
        """Group means of per-tree columns, summed in tree order."""
        V = np.asarray(V, dtype=float)
        g = self.group_size
        out = np.empty((V.shape[0], self.n_groups))
        for k in range(self.n_groups):
            acc = np.zeros(V.shape[0])
            for q in self.members(k):
                acc += V[:, q]
            out[:, k] = acc / g
        return out

    def source_chfs(self, x) -> list:
        chfs = self.parent.source_chfs(x)
        return [stepfunction.mean([chfs[q] for q in self.members(k)]) for k in range(self.n_groups)]

    def source_values(self, X, times) -> np.ndarray:
        return self.reduce_values(self.parent.source_values(X, times))

    def source_grid_values(self, X, grid) -> np.ndarray:
        return self.reduce_values(self.parent.source_grid_values(X, grid))


def _grow_one(args):
    ds, q, seed, rule, d, mtry, max_depth = args
    boot_seed, grow_seed = tree_seeds(seed, q)
    in_bag, _ = bootstrap_sample(ds.n, boot_seed)
    if not ds.event[in_bag].any():
        raise ValueError(f"bootstrap sample of tree {q} contains no observed events")
    return grow_tree(ds, in_bag, rule, d, mtry, max_depth, grow_seed)


def fit_forest(
    ds: SurvivalDataset,
    n_trees: int = 100,
    rule: str = "logrank",
    min_unique_deaths: int = 3,
    mtry: Optional[int] = None,
    max_depth: Optional[int] = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> Forest:
    """Grow ``n_trees`` survival trees on independent bootstrap samples.

    Tree ``q`` depends only on ``(ds, params, seed, q)``; the result is the
    same for any ``n_jobs``.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    if not ds.event.any():
        raise ValueError("dataset contains no observed events")
    rule = normalize_rule(rule)
    jobs = [(ds, q, seed, rule, min_unique_deaths, mtry, max_depth) for q in range(n_trees)]
    if n_jobs is None or n_jobs <= 1:
        trees = [_grow_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(_grow_one, jobs, chunksize=max(1, n_trees // (4 * n_jobs))))
    params = {
        "n_trees": n_trees,
        "rule": rule,
        "min_unique_deaths": min_unique_deaths,
        "mtry": trees[0].params["mtry"],
        "max_depth": max_depth,
    }
    return Forest(trees, params, seed)


def ensemble_chf(forest: Forest, x) -> StepFunction:
    """Average of the tree cumulative hazards at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (forest.n_features,):
        raise ValueError(f"expected a vector of {forest.n_features} features")
    return stepfunction.mean(forest.source_chfs(x))


def oob_ensemble_chf(forest: Forest, ds: SurvivalDataset, i: int) -> StepFunction:
    """Average cumulative hazard of training row ``i`` over trees where it is out of bag."""
    trees = [t for t in forest.trees if np.any(t.oob == i)]
    if not trees:
        raise ValueError(f"sample {i} is in-bag for every tree; no OOB trees")
    return stepfunction.mean([t.predict_chf(ds.X[i]) for t in trees])


def group_trees(forest: Forest, n_groups: int) -> GroupedForest:
    return GroupedForest(forest, n_groups)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

@dataclass
class SavedModel:
    forest: Forest
    weights: Optional[np.ndarray] = None
    n_groups: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    @property
    def sources(self):
        if self.n_groups is None or self.n_groups == self.forest.n_trees:
            return self.forest
        return GroupedForest(self.forest, self.n_groups)


def _tree_to_dict(t: SurvivalTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": [None if np.isnan(v) else float(v) for v in t.threshold],
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "leaf_index": t.leaf_index.tolist(),
        "n_features": t.n_features,
        "in_bag": t.in_bag.tolist(),
        "oob": t.oob.tolist(),
        "params": t.params,
        "seed": [t.seed[0], list(t.seed[1])] if t.seed is not None else None,
        "candidates": [list(c) for c in t.candidates],
        "leaves": [
            {
                "death_times": leaf.death_times.tolist(),
                "deaths": leaf.deaths.tolist(),
                "at_risk": leaf.at_risk.tolist(),
                "knots": leaf.chf.knots.tolist(),
                "values": leaf.chf.values.tolist(),
            }
            for leaf in t.leaves
        ],
    }


def _tree_from_dict(d: dict) -> SurvivalTree:
    leaves = [
        LeafEstimate(
            StepFunction(lf["knots"], lf["values"], check=False),
            np.array(lf["death_times"], dtype=float),
            np.array(lf["deaths"], dtype=np.int64),
            np.array(lf["at_risk"], dtype=np.int64),
        )
        for lf in d["leaves"]
    ]
    return SurvivalTree(
        d["feature"],
        [np.nan if v is None else v for v in d["threshold"]],
        d["left"], d["right"], d["leaf_index"], leaves, d["n_features"],
        in_bag=d["in_bag"], oob=d["oob"], params=d["params"],
        seed=None if d["seed"] is None else (d["seed"][0], list(d["seed"][1])),
        candidates=[tuple(c) for c in d["candidates"]],
    )


def save_model(path, forest: Forest, weights=None, n_groups=None, metadata=None):
    """Write a JSON model file. Floats are stored in shortest round-trip form."""
    doc = {
        "format": "wrsf-model",
        "format_version": FORMAT_VERSION,
        "seed": forest.seed,
        "params": forest.params,
        "n_groups": n_groups,
        "weights": None if weights is None else [float(w) for w in weights],
        "metadata": metadata or {},
        "trees": [_tree_to_dict(t) for t in forest.trees],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")))


def load_model(path) -> SavedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "wrsf-model":
        raise ValueError(f"{path}: not a model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {doc.get('format_version')}")
    forest = Forest([_tree_from_dict(t) for t in doc["trees"]], doc["params"], doc["seed"])
    weights = None if doc["weights"] is None else np.array(doc["weights"], dtype=float)
    return SavedModel(forest, weights, doc["n_groups"], doc["metadata"])
