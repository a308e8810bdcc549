"""Right-continuous cumulative hazard step functions."""

from __future__ import annotations

import numpy as np


class StepFunction:
    """Nondecreasing right-continuous step function starting at zero.

    ``H(t)`` equals ``values[k]`` for the largest ``knots[k] <= t`` and ``0``
    for ``t < knots[0]``.
    """

    __slots__ = ("knots", "values")

    def __init__(self, knots, values, check=True):
        knots = np.array(knots, dtype=float).ravel()
        values = np.array(values, dtype=float).ravel()
        if check:
            if knots.shape != values.shape:
                raise ValueError("knots and values must have the same length")
            if knots.size and np.any(np.diff(knots) <= 0):
                raise ValueError("knots must be strictly increasing")
            if values.size and (values[0] < 0 or np.any(np.diff(values) < 0)):
                raise ValueError("values must be nonnegative and nondecreasing")
        knots.setflags(write=False)
        values.setflags(write=False)
        self.knots = knots
        self.values = values

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls([], [])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.knots, t, side="right") - 1
        if self.values.size == 0:
            return np.zeros_like(t)
        out = np.where(pos >= 0, self.values[np.maximum(pos, 0)], 0.0)
        return out if out.ndim else float(out)

    def survival(self, t):
        """``exp(-H(t))``."""
        return np.exp(-np.asarray(self(t)))

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.knots.tobytes(), self.values.tobytes()))

    def __len__(self):
        return self.knots.size

    def __repr__(self):
        return f"StepFunction(knots={self.knots.tolist()}, values={self.values.tolist()})"


def union_knots(functions) -> np.ndarray:
    knots = [f.knots for f in functions if f.knots.size]
    if not knots:
        return np.empty(0)
    return np.unique(np.concatenate(knots))


def combine(functions, coefficients) -> StepFunction:
    """``sum_q coefficients[q] * functions[q]`` on the union of knots.

    Terms are accumulated in index order so that equal inputs give
    bit-identical outputs.
    """
    grid = union_knots(functions)
    total = np.zeros(grid.size)
    for f, c in zip(functions, coefficients):
        total += c * f(grid)
    return StepFunction(grid, total, check=False)


def mean(functions) -> StepFunction:
    grid = union_knots(functions)
    total = np.zeros(grid.size)
    for f in functions:
        total += f(grid)
    return StepFunction(grid, total / len(functions), check=False)
