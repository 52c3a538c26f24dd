"""
Linear complementarity problems (R, theta): find u, v >= 0 with
v = theta + R u and u . v = 0.

Solved with Lemke's complementary pivoting (covering vector e, lexicographic
ratio test). The result is polished on the final active set so that the
complementary slacks are exactly zero up to the linear solve.
"""
from typing import List, NamedTuple, Tuple
import logging

import numpy as np

from rbm_stationary.exceptions import (
    DimensionMismatch,
    PivotLimitExceeded,
    RayTermination,
    SingularMatrix,
)
from rbm_stationary.numerics import Matrix, Vector, solve_linear

__all__ = [
    "LcpSolution",
    "ResidualReport",
    "solve_lcp",
    "verify_complementarity",
]

logger = logging.getLogger(__name__)

PIVOT_EPS = 1e-13


class LcpSolution(NamedTuple):
    u: Vector
    v: Vector
    active_set: Tuple[int, ...]
    pivots_used: int


class ResidualReport(NamedTuple):
    u_negativity: float
    v_negativity: float
    complementarity_gap: float
    linear_residual: float

    def max_residual(self) -> float:
        return max(self)


def pivot_limit(m: int) -> int:
    return 2 ** min(m, 20)


def solve_lcp(R: Matrix, theta: Vector) -> LcpSolution:
    """
    Solve the LCP for (R, theta).

    R must pass the admissibility gate of the problem module, which makes the
    solution unique; RayTermination or PivotLimitExceeded therefore signal a
    caller bug (inadmissible R) and are never retried.
    """
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    m = theta.shape[0]
    if R.shape != (m, m):
        raise DimensionMismatch(f"R of shape {R.shape} does not fit theta of length {m}")

    if np.all(theta >= 0.0):
        return LcpSolution(np.zeros(m), theta.copy(), (), 0)

    # Tableau columns: w (0..m-1), z (m..2m-1), z0 (2m), rhs (2m+1); w - R z - e z0 = theta
    tableau = np.zeros((m, 2 * m + 2))
    tableau[:, :m] = np.eye(m)
    tableau[:, m:2 * m] = -R
    tableau[:, 2 * m] = -1.0
    tableau[:, 2 * m + 1] = theta
    basis: List[int] = list(range(m))
    artificial = 2 * m

    # z0 enters at the row of the most negative theta
    row = int(np.argmin(theta))
    _pivot(tableau, row, artificial)
    leaving = basis[row]
    basis[row] = artificial
    pivots = 1

    limit = pivot_limit(m)
    while True:
        entering = leaving + m if leaving < m else leaving - m
        row = _lexicographic_ratio_row(tableau, entering, m)
        if row is None:
            raise RayTermination(f"Ray termination after {pivots} pivots: R is not admissible")
        _pivot(tableau, row, entering)
        leaving = basis[row]
        basis[row] = entering
        pivots += 1
        if leaving == artificial:
            break
        if pivots > limit:
            raise PivotLimitExceeded(f"More than {limit} pivots for an LCP of size {m}")

    u = np.zeros(m)
    for r, var in enumerate(basis):
        if m <= var < 2 * m:
            u[var - m] = max(tableau[r, -1], 0.0)
    u = _polish(R, theta, u)
    v = theta + R @ u
    active = tuple(int(i) for i in np.flatnonzero(u > 0.0))
    v[list(active)] = 0.0
    v = np.where(np.abs(v) <= 1e-14 * (1.0 + np.max(np.abs(theta))), 0.0, v)
    return LcpSolution(u, v, active, pivots)


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    column = tableau[:, col].copy()
    column[row] = 0.0
    tableau -= np.outer(column, tableau[row])


def _lexicographic_ratio_row(tableau: np.ndarray, col: int, m: int):
    """
    Minimum ratio test over rows with a positive entry in `col`; ties are broken
    by comparing rows of the current basis inverse (the w-columns), scaled the
    same way. Returns None on ray termination.
    """
    column = tableau[:, col]
    candidates = np.flatnonzero(column > PIVOT_EPS)
    if candidates.size == 0:
        return None
    keys = np.column_stack([tableau[candidates, -1], tableau[candidates, :m]]) / column[candidates, None]
    best = 0
    for i in range(1, candidates.size):
        diff = keys[i] - keys[best]
        nonzero = np.flatnonzero(np.abs(diff) > 1e-12 * (1.0 + np.abs(keys[best])))
        if nonzero.size and diff[nonzero[0]] < 0.0:
            best = i
    return int(candidates[best])


def _polish(R: Matrix, theta: Vector, u: Vector) -> Vector:
    """
    Re-solve R_SS u_S = -theta_S on the active set S of the pivoting result.
    Falls back to the pivoting values if the refined solution leaves the cone.
    """
    active = np.flatnonzero(u > 0.0)
    if active.size == 0:
        return u
    try:
        refined_s = solve_linear(R[np.ix_(active, active)], -theta[active])
    except SingularMatrix:
        return u
    if np.any(refined_s < 0.0):
        return u
    refined = np.zeros_like(u)
    refined[active] = refined_s
    return refined


def verify_complementarity(R: Matrix, theta: Vector, sol: LcpSolution) -> ResidualReport:
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(sol.u, dtype=float)
    v = np.asarray(sol.v, dtype=float)
    m = theta.shape[0]
    if R.shape != (m, m) or u.shape != (m,) or v.shape != (m,):
        raise DimensionMismatch(
            f"R {R.shape}, theta ({m},), u {u.shape}, v {v.shape} do not agree"
        )
    return ResidualReport(
        u_negativity=float(np.max(np.maximum(-u, 0.0))),
        v_negativity=float(np.max(np.maximum(-v, 0.0))),
        complementarity_gap=float(np.max(np.abs(u * v))),
        linear_residual=float(np.max(np.abs(v - theta - R @ u))),
    )
