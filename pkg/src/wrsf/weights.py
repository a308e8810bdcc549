"""Training tree weights on the unit simplex.

The weighted forest predicts ``H(t, w | x) = sum_q w_q H_q(t | x)``. Weights
are chosen to minimise the hinge surrogate of the concordance index

    f(w) = sum_{(i,j)} max(0, sum_q w_q (H_q(t_i*|x_i) - H_q(t_j*|x_j))) + lam * ||w||^2

over ``w >= 0, sum(w) = 1``. The rows of ``D`` below are the per-source
differences ``H_q(t_i*|x_i) - H_q(t_j*|x_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stepfunction
from .dataset import PairSet, SurvivalDataset
from .metrics import check_policy, event_grid
from .stepfunction import StepFunction

__all__ = [
    "SIMPLEX_ATOL",
    "check_weights",
    "uniform_weights",
    "project_simplex",
    "PairDifferenceMatrix",
    "QPSolution",
    "source_matrix",
    "build_pair_differences",
    "sample_constraints",
    "hinge_objective",
    "optimize_weights_qp",
    "sigmoid_objective",
    "optimize_weights_sigmoid",
    "combine_values",
    "weighted_chf",
]

SIMPLEX_ATOL = 1e-9


def check_weights(w, size: Optional[int] = None) -> np.ndarray:
    """Validate a weight vector on the unit simplex.

    Entries in ``[-1e-12, 0)`` are clipped to zero; anything more negative, or a
    sum off by more than ``1e-9``, is an error.
    """
    w = np.array(w, dtype=float).ravel()
    if size is not None and w.size != size:
        raise ValueError(f"expected {size} weights, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < -1e-12):
        raise ValueError("weights must be nonnegative")
    w[w < 0] = 0.0
    if abs(w.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


def uniform_weights(size: int) -> np.ndarray:
    return np.full(size, 1.0 / size)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = 1}`` by sorting."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values")
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, n + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    # one renormalisation absorbs the rounding of theta
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class PairDifferenceMatrix:
    matrix: np.ndarray
    pairs: PairSet
    policy: str = "sample"
    grid: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.matrix.shape

    def __len__(self):
        return self.matrix.shape[0]


@dataclass
class QPSolution:
    weights: np.ndarray
    objective: float
    slacks: np.ndarray
    iterations: int
    converged: bool
    lam: float
    gap: float = float("nan")
    note: str = ""


def source_matrix(sources, ds: SurvivalDataset, policy: str = "sample", grid=None) -> np.ndarray:
    """``V[i, q]``: source ``q`` evaluated for sample ``i`` under ``policy``."""
    check_policy(policy)
    if policy == "sample":
        return sources.source_values(ds.X, ds.time)
    if grid is None:
        grid = event_grid(ds)
    return sources.source_grid_values(ds.X, grid)


def build_pair_differences(sources, ds: SurvivalDataset, pairs: PairSet, policy: str = "sample",
                           grid=None, values: Optional[np.ndarray] = None) -> PairDifferenceMatrix:
    """Rows ``V[i] - V[j]`` for every pair; ``values`` may pass a precomputed ``V``."""
    if len(pairs) == 0:
        raise ValueError("empty pair set: nothing to optimize")
    if policy == "grid" and grid is None:
        grid = event_grid(ds)
    V = source_matrix(sources, ds, policy, grid) if values is None else np.asarray(values, dtype=float)
    D = V[pairs.first] - V[pairs.second]
    if not np.all(np.isfinite(D)):
        raise ValueError("non-finite hazard differences")
    return PairDifferenceMatrix(D, pairs, policy, None if grid is None else np.asarray(grid))


def sample_constraints(pairs: PairSet, K: int, seed=0) -> PairSet:
    """``K`` distinct pairs drawn uniformly without replacement, in original order."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if K >= len(pairs):
        return pairs
    rows = np.sort(np.random.default_rng(seed).choice(len(pairs), size=K, replace=False))
    return PairSet(pairs.pairs[rows], pairs.total)


def hinge_objective(D, w, lam: float) -> float:
    D = np.asarray(getattr(D, "matrix", D), dtype=float)
    w = np.asarray(w, dtype=float)
    return float(np.maximum(D @ w, 0.0).sum() + lam * (w @ w))


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def optimize_weights_qp(
    D,
    lam: float = 0.01,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> QPSolution:
    """Minimise the hinge objective over the unit simplex.

    Solves the quadratic program in ``(w, xi)``

        min  lam ||w||^2 + sum(xi)
        s.t. xi >= D w,  xi >= 0,  w >= 0,  sum(w) = 1

    with a Mehrotra predictor-corrector interior point method. The slack
    variables are eliminated from each Newton system, leaving one ``Q x Q``
    Cholesky factorisation per iteration. ``converged`` is set when the
    residuals and the complementarity gap fall below ``tol`` (relative). The
    returned point is never worse than uniform weights.
    """
    D = np.asarray(getattr(D, "matrix", D), dtype=float)
    if not lam > 0:
        raise ValueError("lam must be positive")
    if D.ndim != 2 or D.shape[0] == 0:
        raise ValueError("D must be a nonempty matrix")
    M, Q = D.shape
    uniform = uniform_weights(Q)
    f_uniform = hinge_objective(D, uniform, lam)

    def solution(w, it, converged, gap, note=""):
        w = check_weights(w, Q)
        slacks = np.maximum(D @ w, 0.0)
        f = float(slacks.sum() + lam * (w @ w))
        if f > f_uniform:
            w, f, slacks = uniform, f_uniform, np.maximum(D @ uniform, 0.0)
            note = (note + "; " if note else "") + "interior point result worse than uniform"
        return QPSolution(w, f, slacks, it, converged, lam, gap, note)

    if Q == 1:
        return solution(np.ones(1), 0, True, 0.0)
    if not np.any(D):
        return solution(uniform, 0, True, 0.0, "all-zero differences; uniform weights")

    scale = max(1.0, float(np.abs(D).max()))
    ones_Q = np.ones(Q)
    w = uniform.copy()
    Dw = D @ w
    xi = np.maximum(Dw, 0.0) + 1.0
    s1, s2, s3 = xi - Dw, xi.copy(), w.copy()
    z1, z2, z3 = np.full(M, 0.5), np.full(M, 0.5), np.ones(Q)
    y = 0.0
    n_cone = 2 * M + Q
    converged = False
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        Dw = D @ w
        r_dw = 2.0 * lam * w + D.T @ z1 - z3 + y
        r_dxi = 1.0 - z1 - z2
        r_p1 = Dw - xi + s1
        r_p2 = s2 - xi
        r_p3 = s3 - w
        r_eq = w.sum() - 1.0
        gap = float(s1 @ z1 + s2 @ z2 + s3 @ z3)
        f = float(np.sum(xi) + lam * (w @ w))
        res_p = max(np.abs(r_p1).max(), np.abs(r_p2).max(), np.abs(r_p3).max(), abs(r_eq))
        res_d = max(np.abs(r_dw).max(), np.abs(r_dxi).max())
        if res_p <= tol * scale and res_d <= tol * scale and gap <= tol * max(1.0, abs(f)):
            converged = True
            break

        W1, W2, W3 = z1 / s1, z2 / s2, z3 / s3
        mix = W1 * W2 / (W1 + W2)
        K = 2.0 * lam * np.eye(Q) + np.diag(W3) + (D.T * mix) @ D
        try:
            chol = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            break

        def solve_K(b):
            return np.linalg.solve(chol.T, np.linalg.solve(chol, b))

        v = solve_K(ones_Q)

        def newton(rc1, rc2, rc3):
            e1 = W1 * r_p1 + rc1 / s1
            e2 = W2 * r_p2 + rc2 / s2
            e3 = W3 * r_p3 + rc3 / s3
            rhs = -r_dw - D.T @ e1 + e3 + D.T @ (W1 / (W1 + W2) * (e1 + e2 - r_dxi))
            u = solve_K(rhs)
            dy = (u.sum() + r_eq) / v.sum()
            dw = u - v * dy
            Ddw = D @ dw
            dxi = (W1 * Ddw + e1 + e2 - r_dxi) / (W1 + W2)
            dz1 = W1 * (Ddw - dxi) + e1
            dz2 = -W2 * dxi + e2
            dz3 = -W3 * dw + e3
            ds1 = (rc1 - s1 * dz1) / z1
            ds2 = (rc2 - s2 * dz2) / z2
            ds3 = (rc3 - s3 * dz3) / z3
            return dw, dxi, dy, (ds1, ds2, ds3), (dz1, dz2, dz3)

        # predictor
        _, _, _, ds_a, dz_a = newton(-s1 * z1, -s2 * z2, -s3 * z3)
        alpha = min(
            min(_max_step(s, d) for s, d in zip((s1, s2, s3), ds_a)),
            min(_max_step(z, d) for z, d in zip((z1, z2, z3), dz_a)),
        )
        mu = gap / n_cone
        gap_aff = sum(
            float((s + alpha * ds) @ (z + alpha * dz))
            for s, ds, z, dz in zip((s1, s2, s3), ds_a, (z1, z2, z3), dz_a)
        )
        sigma = (gap_aff / gap) ** 3 if gap > 0 else 0.0
        # corrector
        rc = [
            -s * z - ds * dz + sigma * mu
            for s, z, ds, dz in zip((s1, s2, s3), (z1, z2, z3), ds_a, dz_a)
        ]
        dw, dxi, dy, ds, dz = newton(*rc)
        alpha = min(
            min(_max_step(s, d) for s, d in zip((s1, s2, s3), ds)),
            min(_max_step(z, d) for z, d in zip((z1, z2, z3), dz)),
        )
        alpha = min(1.0, 0.99 * alpha)
        w = w + alpha * dw
        xi = xi + alpha * dxi
        y = y + alpha * dy
        s1, s2, s3 = s1 + alpha * ds[0], s2 + alpha * ds[1], s3 + alpha * ds[2]
        z1, z2, z3 = z1 + alpha * dz[0], z2 + alpha * dz[1], z3 + alpha * dz[2]

    w_final = np.maximum(w, 0.0)
    w_final = w_final / w_final.sum()
    return solution(w_final, it, converged, gap)


def sigmoid_objective(D, w, scale: float = 1.0) -> float:
    D = np.asarray(getattr(D, "matrix", D), dtype=float)
    z = -scale * (D @ np.asarray(w, dtype=float))
    return float(np.mean(0.5 * (1.0 + np.tanh(0.5 * z))))


def optimize_weights_sigmoid(
    D,
    step: float = 1.0,
    n_iter: int = 500,
    scale: float = 1.0,
    return_trajectory: bool = False,
):
    """Projected gradient ascent on the sigmoid-smoothed concordance.

    Maximises ``mean(sigmoid(-scale * D @ w))`` over the simplex from uniform
    weights. A step is accepted only if it does not lower the objective; the
    step length grows after acceptance and halves after rejection.
    """
    D = np.asarray(getattr(D, "matrix", D), dtype=float)
    if D.ndim != 2 or D.shape[0] == 0:
        raise ValueError("D must be a nonempty matrix")
    M, Q = D.shape
    w = uniform_weights(Q)
    f = sigmoid_objective(D, w, scale)
    trajectory = [(w.copy(), f)]
    eta = step
    for _ in range(n_iter):
        z = -scale * (D @ w)
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        grad = -scale * (D.T @ (s * (1.0 - s))) / M
        if not np.any(grad):
            break
        while eta > 1e-12:
            w_new = project_simplex(w + eta * grad)
            f_new = sigmoid_objective(D, w_new, scale)
            if f_new >= f:
                break
            eta *= 0.5
        else:
            break
        if np.array_equal(w_new, w):
            break
        w, f = w_new, f_new
        trajectory.append((w.copy(), f))
        eta *= 1.5
    w = check_weights(w, Q)
    return (w, trajectory) if return_trajectory else w


def combine_values(V, w=None) -> np.ndarray:
    """Column combination of ``V`` accumulated in source order.

    ``w=None`` gives the plain average (sum then divide), matching the
    unweighted forest estimate bit for bit.
    """
    V = np.asarray(V, dtype=float)
    acc = np.zeros(V.shape[0])
    if w is None:
        for q in range(V.shape[1]):
            acc += V[:, q]
        return acc / V.shape[1]
    for q in range(V.shape[1]):
        acc += w[q] * V[:, q]
    return acc


def weighted_chf(sources, w, x) -> StepFunction:
    """``sum_q w_q H_q(t | x)`` on the union of the sources' knots."""
    w = np.asarray(w, dtype=float)
    if w.size != sources.n_sources:
        raise ValueError(f"{w.size} weights for {sources.n_sources} hazard sources")
    x = np.asarray(x, dtype=float)
    if x.shape != (sources.n_features,):
        raise ValueError(f"expected a vector of {sources.n_features} features")
    return stepfunction.combine(sources.source_chfs(x), w)
