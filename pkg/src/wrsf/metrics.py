"""Harrell's concordance index.

A pair ``(i, j)`` with an observed event at ``i`` and ``time[i] < time[j]`` is
counted as concordant when ``S(t_i*|x_i) > S(t_j*|x_j)``, equivalently
``H(t_i*|x_i) < H(t_j*|x_j)``. Ties count zero.

Evaluation time policies
------------------------
``"sample"``
    ``t_i*`` is the sample's own observed time ``T_i``.
``"grid"``
    the compared value is the risk score ``sum_t H(t|x_i)`` over a fixed grid
    of times, by default the distinct event times of the training data. The
    comparison direction is the same as for ``"sample"``, so under this policy
    the index equals one minus the conventional risk-score concordance when
    there are no ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import PairSet, SurvivalDataset, admissible_pairs

__all__ = ["POLICIES", "CIndexReport", "evaluation_values", "c_index", "c_index_of_weights", "event_grid"]

POLICIES = ("sample", "grid")


def check_policy(policy: str) -> str:
    if policy not in POLICIES:
        raise ValueError(f"unknown time policy {policy!r}; expected one of {POLICIES}")
    return policy


def event_grid(ds: SurvivalDataset) -> np.ndarray:
    """Distinct observed event times."""
    return np.unique(ds.time[ds.event])


@dataclass(frozen=True)
class CIndexReport:
    c_index: float
    concordant: int
    admissible: int
    pair_policy: str = "strict"
    time_policy: str = "sample"

    def __float__(self):
        return self.c_index


def evaluation_values(predictions, ds: SurvivalDataset, policy: str = "sample", grid=None) -> np.ndarray:
    """Compared quantity per sample: ``H(T_i|x_i)`` or ``sum_t H(t|x_i)``."""
    check_policy(policy)
    if len(predictions) != ds.n:
        raise ValueError(f"{len(predictions)} predictions for {ds.n} samples")
    if policy == "sample":
        return np.array([float(f(t)) for f, t in zip(predictions, ds.time)])
    if grid is None:
        raise ValueError("the grid policy needs an explicit time grid")
    grid = np.asarray(grid, dtype=float)
    return np.array([float(np.sum(f(grid))) for f in predictions])


def c_index(
    predictions,
    ds: SurvivalDataset,
    policy: str = "sample",
    grid=None,
    pairs: Optional[PairSet] = None,
) -> CIndexReport:
    """Concordance of per-sample cumulative hazards with observed outcomes.

    ``predictions`` is a sequence of step functions, one per sample, or an
    array of already evaluated values.
    """
    if isinstance(predictions, np.ndarray) and predictions.dtype != object:
        values = np.asarray(predictions, dtype=float)
        if values.shape != (ds.n,):
            raise ValueError(f"expected {ds.n} values, got shape {values.shape}")
    else:
        values = evaluation_values(predictions, ds, policy, grid)
    if pairs is None:
        pairs = admissible_pairs(ds)
    M = len(pairs)
    if M == 0:
        raise ValueError("no admissible pairs")
    concordant = int(np.count_nonzero(values[pairs.first] < values[pairs.second]))
    return CIndexReport(concordant / M, concordant, M, "strict", policy)


def c_index_of_weights(D, w) -> float:
    """Fraction of rows with ``sum_q w_q (H_q(t_j*|x_j) - H_q(t_i*|x_i)) > 0``.

    ``D`` holds the differences ``H_q(t_i*|x_i) - H_q(t_j*|x_j)`` row by row.
    """
    D = np.asarray(getattr(D, "matrix", D), dtype=float)
    w = np.asarray(w, dtype=float)
    if D.ndim != 2 or D.shape[1] != w.size:
        raise ValueError(f"shape mismatch: D {D.shape}, w {w.shape}")
    if D.shape[0] == 0:
        raise ValueError("no rows")
    return float(np.count_nonzero(-(D @ w) > 0) / D.shape[0])
