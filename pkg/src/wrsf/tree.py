"""Survival trees grown with log-rank type splitting rules.

Each terminal node stores the Nelson-Aalen estimate built from the in-bag
samples that reach it. Splits send ``x <= threshold`` to the left daughter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dataset import SurvivalDataset
from .stepfunction import StepFunction

__all__ = [
    "RULES",
    "LeafEstimate",
    "SplitCandidate",
    "SurvivalTree",
    "nelson_aalen",
    "log_rank_statistic",
    "conservation_statistic",
    "approx_log_rank_statistic",
    "candidate_scores",
    "best_split",
    "grow_tree",
    "predict_chf",
    "default_mtry",
]

RULES = ("logrank", "conservation", "approx-logrank")
# Scores within this relative distance of the best are ties, resolved by
# (lower feature index, lower threshold).
TIE_RTOL = 1e-10


def normalize_rule(rule: str) -> str:
    key = rule.lower().replace("_", "-")
    aliases = {"log-rank": "logrank", "approx-log-rank": "approx-logrank", "approx-logrank": "approx-logrank"}
    key = aliases.get(key, key)
    if key not in RULES:
        raise ValueError(f"unknown splitting rule {rule!r}; expected one of {RULES}")
    return key


def default_mtry(m: int) -> int:
    return max(1, math.ceil(math.sqrt(m)))


@dataclass(frozen=True, eq=False)
class LeafEstimate:
    chf: StepFunction
    death_times: np.ndarray
    deaths: np.ndarray
    at_risk: np.ndarray

    @property
    def unique_deaths(self) -> int:
        return int(self.death_times.size)


def nelson_aalen(time, event) -> LeafEstimate:
    """Nelson-Aalen estimate ``H(t) = sum_{t_j <= t} Z_j / Y_j``.

    The running sums are formed in exact rational arithmetic, so every knot
    value is the correctly rounded cumulative hazard.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    death_times, deaths = np.unique(time[event], return_counts=True)
    sorted_time = np.sort(time)
    at_risk = sorted_time.size - np.searchsorted(sorted_time, death_times, side="left")
    acc = Fraction(0)
    values = []
    for z, y in zip(deaths.tolist(), at_risk.tolist()):
        acc += Fraction(z, y)
        values.append(float(acc))
    return LeafEstimate(
        StepFunction(death_times, values, check=False),
        death_times,
        deaths.astype(np.int64),
        at_risk.astype(np.int64),
    )


# ---------------------------------------------------------------------------
# Single-threshold statistics
# ---------------------------------------------------------------------------

def _daughter_counts(time, event, x, threshold):
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    left = np.asarray(x, dtype=float) <= threshold
    ut = np.unique(time[event])
    at_risk = time[:, None] >= ut[None, :]
    died = (time[:, None] == ut[None, :]) & event[:, None]
    Y1 = at_risk[left].sum(axis=0).astype(float)
    Y2 = at_risk[~left].sum(axis=0).astype(float)
    Z1 = died[left].sum(axis=0).astype(float)
    Z2 = died[~left].sum(axis=0).astype(float)
    return left, Y1, Y2, Z1, Z2


def log_rank_statistic(time, event, x, threshold) -> float:
    """Log-rank statistic ``L(x, c)`` of the split ``x <= threshold``.

    Returns ``nan`` when a daughter is empty or the variance term vanishes.
    """
    left, Y1, Y2, Z1, Z2 = _daughter_counts(time, event, x, threshold)
    if left.all() or not left.any():
        return float("nan")
    Y = Y1 + Y2
    Z = Z1 + Z2
    num = np.sum(Z1 - Y1 * Z / Y)
    multi = Y > 1
    frac = Y1[multi] / Y[multi]
    var = np.sum(frac * (1 - frac) * (Y[multi] - Z[multi]) / (Y[multi] - 1) * Z[multi])
    if not var > 0:
        return float("nan")
    return float(num / math.sqrt(var))


def _conservation(Y1, Y2, Z1, Z2):
    def inner(Yj, Zj):
        ratio = np.divide(Zj, Yj, out=np.zeros_like(Zj), where=Yj > 0)
        cum = np.cumsum(ratio, axis=-1)
        return np.sum(Zj[..., :-1] * Yj[..., 1:] * cum[..., :-1], axis=-1)

    first1, first2 = Y1[..., 0], Y2[..., 0]
    return (first1 * inner(Y1, Z1) + first2 * inner(Y2, Z2)) / (first1 + first2)


def conservation_statistic(time, event, x, threshold) -> float:
    """Conservation-of-events separation ``1 / (1 + Cons(x, c))``, in ``(0, 1]``.

    The undefined count ``N_kj`` of the textbook formula is read as the
    number of deaths ``Z_kj``. Returns ``nan`` unless both daughters contain
    an observed event.
    """
    left, Y1, Y2, Z1, Z2 = _daughter_counts(time, event, x, threshold)
    if Z1.sum() == 0 or Z2.sum() == 0:
        return float("nan")
    return float(1.0 / (1.0 + _conservation(Y1, Y2, Z1, Z2)))


def approx_log_rank_statistic(time, event, x, threshold, node_chf: Optional[StepFunction] = None) -> float:
    """Approximate log-rank statistic using the node cumulative hazard.

    ``node_chf`` defaults to the Nelson-Aalen estimate of the node itself.
    Returns ``nan`` when the radicand is not positive.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if node_chf is None:
        node_chf = nelson_aalen(time, event).chf
    left = np.asarray(x, dtype=float) <= threshold
    H = np.asarray(node_chf(time), dtype=float)
    Z = float(event.sum())
    Z1 = float(event[left].sum())
    S = float(H[left].sum())
    radicand = S * (Z - S)
    if not radicand > 0:
        return float("nan")
    return float(math.sqrt(Z) * (Z1 - S) / math.sqrt(radicand))


# ---------------------------------------------------------------------------
# Vectorised threshold search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    statistic: float
    n_left: int
    n_right: int

    @property
    def score(self) -> float:
        return abs(self.statistic)


def candidate_scores(time, event, x, rule="logrank", min_unique_deaths=3, node_chf=None):
    """Evaluate every midpoint threshold of one feature.

    Returns ``(thresholds, statistics, valid, n_left)``. ``statistics`` holds the
    signed log-rank value or the transformed conservation value; ``valid`` marks
    thresholds whose statistic is defined and whose daughters each keep at least
    ``min_unique_deaths`` distinct death times.
    """
    rule = normalize_rule(rule)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    xs, ts, es = x[order], time[order], event[order]
    cut = np.flatnonzero(xs[:-1] < xs[1:])
    empty = (np.empty(0), np.empty(0), np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64))
    ut = np.unique(ts[es])
    if cut.size == 0 or ut.size == 0:
        return empty
    lo, hi = xs[cut], xs[cut + 1]
    thresholds = 0.5 * (lo + hi)
    thresholds = np.where(thresholds < hi, thresholds, lo)
    n_left = cut + 1

    at_risk = ts[:, None] >= ut[None, :]
    died = (ts[:, None] == ut[None, :]) & es[:, None]
    Y1 = np.cumsum(at_risk, axis=0)[cut].astype(float)
    Z1 = np.cumsum(died, axis=0)[cut].astype(float)
    Y = at_risk.sum(axis=0).astype(float)
    Z = died.sum(axis=0).astype(float)
    Y2, Z2 = Y - Y1, Z - Z1
    valid = ((Z1 > 0).sum(axis=1) >= min_unique_deaths) & ((Z2 > 0).sum(axis=1) >= min_unique_deaths)

    with np.errstate(divide="ignore", invalid="ignore"):
        if rule == "logrank":
            num = np.sum(Z1 - Y1 * Z / Y, axis=1)
            multi = Y > 1
            frac = Y1[:, multi] / Y[multi]
            var = np.sum(frac * (1 - frac) * ((Y[multi] - Z[multi]) / (Y[multi] - 1) * Z[multi]), axis=1)
            ok = var > 0
            stat = np.where(ok, num / np.sqrt(np.where(ok, var, 1.0)), np.nan)
        elif rule == "conservation":
            ok = (Z1.sum(axis=1) > 0) & (Z2.sum(axis=1) > 0)
            stat = np.where(ok, 1.0 / (1.0 + _conservation(Y1, Y2, Z1, Z2)), np.nan)
        else:
            if node_chf is None:
                node_chf = nelson_aalen(time, event).chf
            H = np.asarray(node_chf(ts), dtype=float)
            S = np.cumsum(H)[cut]
            Ztot = float(es.sum())
            Zl = np.cumsum(es)[cut].astype(float)
            radicand = S * (Ztot - S)
            ok = radicand > 0
            stat = np.where(ok, math.sqrt(Ztot) * (Zl - S) / np.sqrt(np.where(ok, radicand, 1.0)), np.nan)
    return thresholds, stat, valid & ok, n_left


def _pick(entries):
    """Highest score; near-ties go to the lowest (feature, threshold)."""
    best = max(e[0] for e in entries)
    cutoff = best - TIE_RTOL * max(1.0, abs(best))
    return min((e for e in entries if e[0] >= cutoff), key=lambda e: (e[1], e[2]))


def best_split(
    time,
    event,
    X,
    features: Sequence[int],
    rule: str = "logrank",
    min_unique_deaths: int = 3,
    node_chf: Optional[StepFunction] = None,
) -> Optional[SplitCandidate]:
    """Best (feature, threshold) among ``features`` or ``None`` for a leaf.

    Log-rank rules maximise ``|L(x, c)|``; the conservation rule maximises
    ``1 / (1 + Cons)``.
    """
    rule = normalize_rule(rule)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    X = np.asarray(X, dtype=float)
    n = time.size
    if n < 2 or np.unique(time[event]).size < min_unique_deaths + 1:
        return None
    if rule == "approx-logrank" and node_chf is None:
        node_chf = nelson_aalen(time, event).chf
    entries = []
    for f in sorted(features):
        thr, stat, valid, n_left = candidate_scores(time, event, X[:, f], rule, min_unique_deaths, node_chf)
        for k in np.flatnonzero(valid):
            s = float(stat[k])
            score = s if rule == "conservation" else abs(s)
            entries.append((score, int(f), float(thr[k]), s, int(n_left[k])))
    if not entries:
        return None
    score, f, c, s, nl = _pick(entries)
    return SplitCandidate(f, c, s, nl, n - nl)


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

def _seed_parts(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy, tuple(seed.spawn_key)
    if isinstance(seed, (tuple, list)) and len(seed) == 2 and isinstance(seed[1], (tuple, list)):
        return seed[0], tuple(seed[1])
    return int(seed), ()


class SurvivalTree:
    """Binary survival tree in flat array form.

    Node ``k`` is internal when ``feature[k] >= 0``; its daughters are
    ``left[k]`` (``x <= threshold[k]``) and ``right[k]``. Terminal nodes point
    into ``leaves`` through ``leaf_index``.
    """

    def __init__(self, feature, threshold, left, right, leaf_index, leaves, n_features,
                 in_bag=None, oob=None, params=None, seed=None, candidates=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf_index = np.asarray(leaf_index, dtype=np.int64)
        self.leaves = list(leaves)
        self.n_features = int(n_features)
        self.in_bag = None if in_bag is None else np.asarray(in_bag, dtype=np.int64)
        self.oob = None if oob is None else np.asarray(oob, dtype=np.int64)
        self.params = dict(params or {})
        self.seed = seed
        self.candidates = candidates if candidates is not None else [()] * self.feature.size

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    def apply(self, X) -> np.ndarray:
        """Node index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return node
            r, k = rows[active], node[active]
            go_left = X[r, f[active]] <= self.threshold[k]
            node[active] = np.where(go_left, self.left[k], self.right[k])

    def apply_leaves(self, X) -> np.ndarray:
        return self.leaf_index[self.apply(X)]

    def predict_chf(self, x) -> StepFunction:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("predict_chf expects a single feature vector")
        return self.leaves[self.apply_leaves(x)[0]].chf

    def hazard_at(self, X, times) -> np.ndarray:
        """``H(times[i] | X[i])`` for every row."""
        leaf = self.apply_leaves(X)
        times = np.asarray(times, dtype=float)
        out = np.empty(leaf.size)
        for k in np.unique(leaf):
            sel = leaf == k
            out[sel] = self.leaves[k].chf(times[sel])
        return out

    def path_to(self, node: int) -> tuple:
        parent = {}
        for k in range(self.node_count):
            if self.feature[k] >= 0:
                parent[int(self.left[k])] = (k, 0)
                parent[int(self.right[k])] = (k, 1)
        path = []
        while node in parent:
            node, side = parent[node]
            path.append(side)
        return tuple(reversed(path))

    def __eq__(self, other):
        if not isinstance(other, SurvivalTree):
            return NotImplemented
        same_arrays = np.array_equal(self.threshold, other.threshold, equal_nan=True) and all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "left", "right", "leaf_index")
        )
        return (
            same_arrays
            and len(self.leaves) == len(other.leaves)
            and all(a.chf == b.chf for a, b in zip(self.leaves, other.leaves))
        )

    __hash__ = None


def grow_tree(
    ds: SurvivalDataset,
    in_bag=None,
    rule: str = "logrank",
    min_unique_deaths: int = 3,
    mtry: Optional[int] = None,
    max_depth: Optional[int] = None,
    seed=0,
) -> SurvivalTree:
    """Grow a survival tree on the (multiset of) rows ``in_bag`` of ``ds``.

    At every node ``mtry`` candidate features (default ``ceil(sqrt(m))``) are
    drawn without replacement from a generator seeded by the tree seed and the
    node's path from the root, so growth is reproducible node by node.
    """
    rule = normalize_rule(rule)
    if min_unique_deaths < 1:
        raise ValueError("min_unique_deaths must be positive")
    if in_bag is None:
        in_bag = np.arange(ds.n)
    in_bag = np.sort(np.asarray(in_bag, dtype=np.int64))
    if in_bag.size == 0 or not ds.event[in_bag].any():
        raise ValueError("in-bag sample contains no observed events")
    m = ds.m
    mtry = default_mtry(m) if mtry is None else int(mtry)
    if not 1 <= mtry:
        raise ValueError("mtry must be at least 1")
    mtry = min(mtry, m)
    entropy, key = _seed_parts(seed)

    feature, threshold, left, right, leaf_index, leaves, candidates = [], [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, np.nan), (left, -1), (right, -1), (leaf_index, -1), (candidates, ())):
            lst.append(v)
        return len(feature) - 1

    def make_leaf(k, rows, fallback):
        est = nelson_aalen(ds.time[rows], ds.event[rows])
        if est.unique_deaths == 0 and fallback is not None:
            est = LeafEstimate(fallback.chf, est.death_times, est.deaths, est.at_risk)
        leaf_index[k] = len(leaves)
        leaves.append(est)

    def grow(k, rows, path, depth, parent_est):
        node_est = nelson_aalen(ds.time[rows], ds.event[rows])
        if node_est.unique_deaths == 0:
            make_leaf(k, rows, parent_est)
            return
        if max_depth is not None and depth >= max_depth:
            make_leaf(k, rows, parent_est)
            return
        rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key + path))
        feats = tuple(sorted(int(f) for f in rng.choice(m, size=mtry, replace=False)))
        candidates[k] = feats
        split = best_split(
            ds.time[rows], ds.event[rows], ds.X[rows], feats, rule, min_unique_deaths,
            node_est.chf if rule == "approx-logrank" else None,
        )
        if split is None:
            make_leaf(k, rows, parent_est)
            return
        feature[k] = split.feature
        threshold[k] = split.threshold
        go_left = ds.X[rows, split.feature] <= split.threshold
        lk = new_node()
        left[k] = lk
        grow(lk, rows[go_left], path + (0,), depth + 1, node_est)
        rk = new_node()
        right[k] = rk
        grow(rk, rows[~go_left], path + (1,), depth + 1, node_est)

    root = new_node()
    grow(root, in_bag, (), 0, None)

    drawn = np.zeros(ds.n, dtype=bool)
    drawn[in_bag] = True
    params = {"rule": rule, "min_unique_deaths": int(min_unique_deaths), "mtry": mtry, "max_depth": max_depth}
    return SurvivalTree(
        feature, threshold, left, right, leaf_index, leaves, m,
        in_bag=in_bag, oob=np.flatnonzero(~drawn), params=params,
        seed=(entropy, list(key)), candidates=candidates,
    )


def predict_chf(tree: SurvivalTree, x) -> StepFunction:
    """Cumulative hazard of the leaf that ``x`` falls into."""
    return tree.predict_chf(x)
