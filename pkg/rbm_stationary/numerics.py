"""
Small dense linear-algebra kernels shared by the reflection, validation and
measure code. Matrices here are tiny (m <= 16 typical, never beyond ~64).
"""
from typing import List, NamedTuple, Sequence, Union
import logging
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from rbm_stationary.exceptions import NotSymmetric, SingularMatrix

__all__ = [
    "KahanSum",
    "Matrix",
    "PowerIterationResult",
    "Vector",
    "as_matrix",
    "as_vector",
    "min_eigenvalue_sym",
    "power_iteration_abs",
    "solve_linear",
    "spectral_radius_abs",
]

logger = logging.getLogger(__name__)

Matrix = np.ndarray
Vector = np.ndarray

PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-12
POWER_RTOL = 1e-8
POWER_MAX_ITER = 10_000


class PowerIterationResult(NamedTuple):
    value: float
    iterations: int
    converged: bool


def as_matrix(values: Union[Matrix, Sequence[Sequence[float]]], square: bool = False) -> Matrix:
    matrix = np.array(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError(f"Expected a non-empty 2-d matrix, got shape {matrix.shape}")
    if square and matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix entries must be finite")
    return matrix


def as_vector(values: Union[Vector, Sequence[float]]) -> Vector:
    vector = np.array(values, dtype=float).reshape(-1)
    if vector.size < 1:
        raise ValueError("Expected a non-empty vector")
    if not np.all(np.isfinite(vector)):
        raise ValueError("Vector entries must be finite")
    return vector


def solve_linear(A: Matrix, y: Vector) -> Vector:
    """
    Solve A z = y by LU with partial pivoting.

    Raises SingularMatrix when a pivot of the factorization falls below
    1e-12 * max|A|.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_linear needs a square matrix, got shape {A.shape}")
    if y.shape != (A.shape[0],):
        raise ValueError(f"Right-hand side of shape {y.shape} does not fit {A.shape}")
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        raise SingularMatrix("Zero matrix")
    with warnings.catch_warnings():
        # exact singularity is reported through the pivot check below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    min_pivot = float(np.min(np.abs(np.diag(lu))))
    if min_pivot < PIVOT_RTOL * scale:
        raise SingularMatrix(f"Pivot {min_pivot:.3e} below {PIVOT_RTOL} * max|A| = {PIVOT_RTOL * scale:.3e}")
    return lu_solve((lu, piv), y, check_finite=False)


def _irreducible_blocks(A: Matrix) -> List[np.ndarray]:
    """
    Index sets of the strongly connected components of the graph of A.
    rho(A) is the largest spectral radius over these diagonal blocks.
    """
    n_blocks, labels = connected_components(csr_matrix(A > 0.0), directed=True, connection="strong")
    return [np.flatnonzero(labels == label) for label in range(n_blocks)]


def _power_iteration_block(A: Matrix, rtol: float, max_iter: int) -> PowerIterationResult:
    """
    Power iteration on A + sI for an irreducible nonnegative block A. Any
    s > 0 makes the iteration primitive, and the Collatz-Wielandt bounds
    min (Bx)_i / x_i <= rho(A) + s <= max (Bx)_i / x_i hold for every positive
    x. s starts at the smallest row sum and follows the running lower bound
    of rho(A); the loop stops once the bracket is within rtol of rho(A).
    """
    shift = float(np.min(A.sum(axis=1)))
    x = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    lower = upper = 0.0
    for iteration in range(1, max_iter + 1):
        y = A @ x
        ratios = y / x
        lower, upper = float(np.min(ratios)), float(np.max(ratios))
        if upper - lower <= rtol * lower:
            return PowerIterationResult(0.5 * (lower + upper), iteration, True)
        shift = max(shift, lower)
        y += shift * x
        x = y / np.linalg.norm(y)
    return PowerIterationResult(0.5 * (lower + upper), max_iter, False)


def power_iteration_abs(V: Matrix, rtol: float = POWER_RTOL,
                        max_iter: int = POWER_MAX_ITER) -> PowerIterationResult:
    """
    rho(|V|) by power iteration from the all-ones vector, run per irreducible
    block. Single-index blocks contribute their diagonal entry exactly.

    `converged` is set only when every block's Collatz-Wielandt bracket is
    within `rtol` relative width; otherwise the bracket midpoint is returned
    flagged as approximate.
    """
    A = np.abs(np.asarray(V, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"Spectral radius needs a square matrix, got shape {A.shape}")
    value = 0.0
    iterations = 0
    converged = True
    for block in _irreducible_blocks(A):
        if block.size == 1:
            value = max(value, float(A[block[0], block[0]]))
            continue
        result = _power_iteration_block(A[np.ix_(block, block)], rtol, max_iter)
        value = max(value, result.value)
        iterations = max(iterations, result.iterations)
        converged = converged and result.converged
    if not converged:
        logger.warning(f"Power iteration bracket did not close to {rtol} within {max_iter} iterations, "
                       f"returning approximate spectral radius {value:.10g}")
    return PowerIterationResult(value, iterations, converged)


def spectral_radius_abs(V: Matrix) -> float:
    return power_iteration_abs(V).value


def min_eigenvalue_sym(A: Matrix) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"Not a square matrix: shape {A.shape}")
    asymmetry = float(np.max(np.abs(A - A.T)))
    if asymmetry > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(A)))):
        raise NotSymmetric(f"Matrix is not symmetric, max |A - A'| = {asymmetry:.3e}")
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


class KahanSum:
    """
    Compensated running sum of scalars or fixed-shape arrays.

    The represented value is `total - compensation`; `compensation` holds the
    low-order bits lost by the last additions.
    """

    def __init__(self, shape=()):
        self.total = np.zeros(shape)
        self.compensation = np.zeros(shape)

    def add(self, value) -> None:
        y = value - self.compensation
        t = self.total + y
        self.compensation = (t - self.total) - y
        self.total = t

    @property
    def value(self):
        value = self.total - self.compensation
        return float(value) if value.ndim == 0 else value

    def merged(self, other: "KahanSum") -> "KahanSum":
        if self.total.shape != other.total.shape:
            raise ValueError(f"Cannot merge sums of shape {self.total.shape} and {other.total.shape}")
        result = KahanSum(self.total.shape)
        result.add(self.total - self.compensation)
        result.add(other.total - other.compensation)
        return result

    def get_state(self):
        return {"total": self.total.tolist(), "compensation": self.compensation.tolist()}

    @staticmethod
    def from_state(state) -> "KahanSum":
        result = KahanSum()
        result.total = np.array(state["total"], dtype=float)
        result.compensation = np.array(state["compensation"], dtype=float)
        return result
