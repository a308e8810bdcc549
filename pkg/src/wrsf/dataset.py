"""Right-censored survival data: ingestion, splits, resampling and pairs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "SchemaError",
    "Sample",
    "SurvivalDataset",
    "PairSet",
    "load_csv",
    "load_veteran",
    "train_test_split",
    "split_indices",
    "bootstrap_sample",
    "admissible_pairs",
    "simulate_proportional_hazards",
]

NUMERIC = "numeric"
CATEGORICAL = "encoded-categorical"

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


class SchemaError(ValueError):
    """A required column is absent or a cell cannot be parsed."""


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    time: float
    event: bool


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Feature matrix ``X`` with observed times and event indicators.

    Parameters
    ----------
    X : array of shape (n, m)
        Feature values. Encoded categoricals are stored as integer codes.
    time : array of shape (n,)
        Observed times, nonnegative.
    event : array of shape (n,)
        ``True`` when the event was observed, ``False`` when right-censored.
    feature_names : sequence of str, optional
    feature_kinds : sequence of {"numeric", "encoded-categorical"}, optional
    """

    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: tuple = ()
    feature_kinds: tuple = ()
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        time = np.asarray(self.time, dtype=float).ravel()
        event = np.asarray(self.event).ravel()
        if event.dtype != bool:
            if not np.all(np.isin(event, (0, 1))):
                raise ValueError("event indicators must be 0/1 or boolean")
            event = event.astype(bool)
        n = X.shape[0]
        if time.shape[0] != n or event.shape[0] != n:
            raise ValueError(
                f"length mismatch: X has {n} rows, time {time.shape[0]}, event {event.shape[0]}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite values")
        if not np.all(np.isfinite(time)):
            raise ValueError("times must be finite")
        if np.any(time < 0):
            raise ValueError("times must be nonnegative")
        m = X.shape[1]
        names = tuple(self.feature_names) or tuple(f"x{k}" for k in range(m))
        kinds = tuple(self.feature_kinds) or (NUMERIC,) * m
        if len(names) != m or len(kinds) != m:
            raise ValueError("feature_names/feature_kinds must have one entry per column")
        object.__setattr__(self, "X", _frozen(X, float))
        object.__setattr__(self, "time", _frozen(time, float))
        object.__setattr__(self, "event", _frozen(event, bool))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_kinds", kinds)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.X[i], float(self.time[i]), bool(self.event[i]))

    def __iter__(self) -> Iterator[Sample]:
        return (self[i] for i in range(self.n))

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def subset(self, indices) -> "SurvivalDataset":
        idx = np.asarray(indices, dtype=int)
        return SurvivalDataset(
            self.X[idx],
            self.time[idx],
            self.event[idx],
            self.feature_names,
            self.feature_kinds,
            self.categories,
        )

    def check_fittable(self):
        if self.n < 2:
            raise ValueError("at least two samples are required for fitting")
        if not self.event.any():
            raise ValueError("at least one observed event is required for fitting")


@dataclass(frozen=True, eq=False)
class PairSet:
    """Ordered comparison pairs ``(i, j)`` with ``event[i]`` and ``time[i] < time[j]``.

    ``total`` is the size of the full admissible set the pairs were drawn from.
    """

    pairs: np.ndarray
    total: int

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", _frozen(p, np.int64))

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def first(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def second(self) -> np.ndarray:
        return self.pairs[:, 1]


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise SchemaError(f"row {row}, column {col!r}: cannot parse {cell!r} as a number") from None
    if not np.isfinite(value):
        raise SchemaError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return value


def _parse_event(cell: str, row: int, col: str) -> bool:
    key = cell.strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    raise SchemaError(f"row {row}, column {col!r}: event indicator must be 0/1 or false/true, got {cell!r}")


def load_csv(
    path,
    time: str = "time",
    event: str = "status",
    features: Sequence[str] | None = None,
) -> SurvivalDataset:
    """Read a comma-separated file with a header row.

    Columns whose cells are not all numeric are integer-coded in order of
    first appearance and tagged ``"encoded-categorical"``. Row numbers in error
    messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row expected") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    index = {name: k for k, name in enumerate(header)}
    if features is None:
        features = [h for h in header if h not in (time, event)]
    for col in [time, event, *features]:
        if col not in index:
            raise SchemaError(f"{path}: missing column {col!r}")

    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"row {r}: expected {len(header)} cells, found {len(row)}")
        for col in [time, event, *features]:
            if row[index[col]].strip() in ("", "NA", "NaN", "nan"):
                raise SchemaError(f"row {r}, column {col!r}: missing value")

    times = np.array([_parse_float(row[index[time]], r, time) for r, row in enumerate(rows, start=2)])
    bad = np.flatnonzero(times < 0)
    if bad.size:
        raise ValueError(f"row {bad[0] + 2}, column {time!r}: negative time {times[bad[0]]}")
    events = np.array([_parse_event(row[index[event]], r, event) for r, row in enumerate(rows, start=2)], dtype=bool)

    columns, kinds, categories = [], [], {}
    for col in features:
        cells = [row[index[col]].strip() for row in rows]
        try:
            columns.append([float(c) for c in cells])
            kinds.append(NUMERIC)
        except ValueError:
            codes: dict[str, int] = {}
            for c in cells:
                codes.setdefault(c, len(codes))
            columns.append([codes[c] for c in cells])
            kinds.append(CATEGORICAL)
            categories[col] = tuple(codes)
    X = np.array(columns, dtype=float).T.reshape(len(rows), len(features))
    return SurvivalDataset(X, times, events, tuple(features), tuple(kinds), categories)


def veteran_path() -> Path:
    return Path(str(resources.files("wrsf") / "data" / "veteran.csv"))


def load_veteran() -> SurvivalDataset:
    """Veterans' Administration lung cancer trial, 137 patients."""
    return load_csv(veteran_path(), time="time", event="status")


def split_indices(n: int, train_fraction: float = 0.75, seed=0):
    """Disjoint sorted index arrays ``(train_idx, test_idx)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(n * train_fraction))
    if n_train < 2 or n_train >= n:
        raise ValueError(f"train_fraction={train_fraction} leaves an empty or degenerate part for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def train_test_split(ds: SurvivalDataset, train_fraction: float = 0.75, seed=0):
    """Random disjoint partition with ``round(n * train_fraction)`` training rows."""
    train_idx, test_idx = split_indices(ds.n, train_fraction, seed)
    train = ds.subset(train_idx)
    if not train.event.any():
        raise ValueError("training part contains no observed events")
    return train, ds.subset(test_idx)


def bootstrap_sample(n, seed=0):
    """Draw ``n`` indices with replacement; return ``(in_bag, oob)``.

    ``n`` may be a dataset or an integer. ``in_bag`` is sorted and keeps
    repeats; ``oob`` holds the indices never drawn.
    """
    if isinstance(n, SurvivalDataset):
        n = n.n
    if n < 1:
        raise ValueError("cannot bootstrap an empty dataset")
    in_bag = np.sort(np.random.default_rng(seed).integers(0, n, size=n))
    drawn = np.zeros(n, dtype=bool)
    drawn[in_bag] = True
    return in_bag, np.flatnonzero(~drawn)


def admissible_pairs(ds: SurvivalDataset) -> PairSet:
    """All ``(i, j)`` with an observed event at ``i`` and ``time[i] < time[j]``.

    Pairs are ordered by ``i`` then ``j``. Tied times are never comparable.
    """
    t, e = ds.time, ds.event
    mask = e[:, None] & (t[:, None] < t[None, :])
    i, j = np.nonzero(mask)
    return PairSet(np.column_stack([i, j]), int(i.size))


def _censoring_rate_for(rate, target):
    # P(censored | rate) = c / (c + rate) is increasing in c; bisect on log c
    lo, hi = np.log(np.min(rate)) - 40.0, np.log(np.max(rate)) + 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        c = np.exp(mid)
        if np.mean(c / (c + rate)) < target:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def simulate_proportional_hazards(
    n: int = 200,
    m: int = 5,
    coef=None,
    censoring_rate: float = 0.3,
    seed=0,
) -> SurvivalDataset:
    """Exponential proportional-hazards data with a known risk ordering.

    Event times follow ``Exp(exp(X @ coef))``; censoring times are exponential
    with a rate scaled so that roughly ``censoring_rate`` of samples are
    censored. By default only the first feature carries risk.
    """
    rng = np.random.default_rng(seed)
    if coef is None:
        coef = np.zeros(m)
        coef[0] = 1.5
    coef = np.asarray(coef, dtype=float)
    X = rng.standard_normal((n, m))
    rate = np.exp(X @ coef)
    event_time = rng.exponential(1.0 / rate)
    if not 0.0 <= censoring_rate < 1.0:
        raise ValueError("censoring_rate must lie in [0, 1)")
    if censoring_rate > 0:
        c_rate = _censoring_rate_for(rate, censoring_rate)
        censor_time = rng.exponential(1.0 / c_rate, size=n)
    else:
        censor_time = np.full(n, np.inf)
    time = np.minimum(event_time, censor_time)
    event = event_time <= censor_time
    return SurvivalDataset(X, time, event)
