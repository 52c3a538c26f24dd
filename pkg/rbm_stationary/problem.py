"""
Problem data of a reflected diffusion in the orthant and the checks that can
be made on it before a run: spectral-radius gate on the reflection matrix,
completely-S test, drift-cone certificate and uniform ellipticity.
"""
from itertools import combinations
from typing import Callable, NamedTuple, Optional, Tuple, Union
import logging

import numpy as np
from scipy.optimize import linprog

from rbm_stationary.exceptions import (
    CoefficientBoundViolated,
    NonpositiveDiagonal,
    SingularMatrix,
)
from rbm_stationary.models.reports import StabilityReport
from rbm_stationary.numerics import (
    Matrix,
    Vector,
    as_matrix,
    as_vector,
    min_eigenvalue_sym,
    solve_linear,
    spectral_radius_abs,
)
from rbm_stationary.utils import canonical_hash

__all__ = [
    "CoefficientField",
    "ConeCertificate",
    "ProblemSpec",
    "StabilityReport",
    "complete_s_exact",
    "spec_hash",
    "validate_drift_cone",
    "validate_ellipticity",
    "validate_reflection",
    "validate_spec",
]

logger = logging.getLogger(__name__)

ELLIPTICITY_TOL = 1e-10
EXACT_S_MAX_DIM = 12
SAMPLE_BOX = 10.0
SAMPLE_STATES = 10_000


class CoefficientField:
    """
    Drift b(x) or diffusion sigma(x): either a constant array or a stateless
    callable of the state. `declared_bound` is the a_1 of the growth condition,
    checked on every evaluation of a callable field.
    """

    def __init__(self, constant_value: Optional[np.ndarray] = None,
                 evaluator: Optional[Callable[[Vector], np.ndarray]] = None,
                 declared_bound: Optional[float] = None):
        if (constant_value is None) == (evaluator is None):
            raise ValueError("CoefficientField needs exactly one of constant_value, evaluator")
        if evaluator is not None and declared_bound is None:
            raise ValueError("A callable coefficient field needs a declared bound")
        self.constant_value = None if constant_value is None else np.array(constant_value, dtype=float)
        if self.constant_value is not None:
            self.constant_value.setflags(write=False)
            if not np.all(np.isfinite(self.constant_value)):
                raise ValueError("Coefficient entries must be finite")
        self.evaluator = evaluator
        self.declared_bound = declared_bound
        if self.constant_value is not None and declared_bound is not None:
            self.check_bound(self.constant_value)

    @staticmethod
    def create(value: Union[np.ndarray, Callable[[Vector], np.ndarray]],
               declared_bound: float = None) -> "CoefficientField":
        if callable(value):
            return CoefficientField(evaluator=value, declared_bound=declared_bound)
        return CoefficientField(constant_value=value, declared_bound=declared_bound)

    @property
    def kind(self) -> str:
        return "constant" if self.constant_value is not None else "callable"

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    def evaluate(self, x: Vector) -> np.ndarray:
        if self.constant_value is not None:
            return self.constant_value
        value = np.asarray(self.evaluator(x), dtype=float)
        self.check_bound(value, x)
        return value

    def check_bound(self, value: np.ndarray, x: Vector = None) -> None:
        where = "" if x is None else f" at x={np.asarray(x).tolist()}"
        if not np.all(np.isfinite(value)):
            raise CoefficientBoundViolated(f"Non-finite coefficient value{where}")
        if self.declared_bound is not None:
            norm = float(np.linalg.norm(value))
            if norm > self.declared_bound:
                raise CoefficientBoundViolated(
                    f"Coefficient norm {norm:.6g} exceeds declared bound {self.declared_bound:.6g}{where}"
                )

    def describe(self):
        if self.constant_value is not None:
            return self.constant_value.tolist()
        return f"{getattr(self.evaluator, '__module__', '?')}.{getattr(self.evaluator, '__qualname__', '?')}"


class ProblemSpec:
    """
    Reflected diffusion dX = b(X)dt + sigma(X)dW + R dL in the orthant R^m_+.
    Columns of R are the reflection directions d_i, one per face {x_i = 0}.
    """

    def __init__(self, R: Matrix, drift: CoefficientField, diffusion: CoefficientField,
                 x0: Vector = None, label: str = ""):
        self.R = as_matrix(R, square=True)
        self.R.setflags(write=False)
        self.m = self.R.shape[0]
        if np.any(np.diag(self.R) <= 0.0):
            raise NonpositiveDiagonal(f"Reflection matrix diagonal {np.diag(self.R).tolist()} is not positive")
        self.drift = drift
        self.diffusion = diffusion
        self.x0 = np.ones(self.m) if x0 is None else as_vector(x0)
        if self.x0.shape != (self.m,) or np.any(self.x0 < 0.0):
            raise ValueError(f"Initial point {self.x0.tolist()} is not a point of the {self.m}-d orthant")
        self.x0.setflags(write=False)
        self.label = label
        self._check_dimensions()

    @staticmethod
    def create(R, drift, diffusion, x0=None, label: str = "",
               drift_bound: float = None, diffusion_bound: float = None) -> "ProblemSpec":
        return ProblemSpec(
            R=R,
            drift=CoefficientField.create(drift, drift_bound),
            diffusion=CoefficientField.create(diffusion, diffusion_bound),
            x0=x0,
            label=label,
        )

    def _check_dimensions(self) -> None:
        b = self.drift.evaluate(self.x0)
        sigma = self.diffusion.evaluate(self.x0)
        if b.shape != (self.m,):
            raise ValueError(f"Drift of shape {b.shape} does not fit dimension {self.m}")
        if sigma.ndim != 2 or sigma.shape[0] != self.m:
            raise ValueError(f"Diffusion of shape {sigma.shape} does not fit dimension {self.m}")

    def __repr__(self) -> str:
        return f"ProblemSpec(label={self.label!r}, m={self.m})"


class ConeCertificate(NamedTuple):
    alpha: Vector
    margin: float
    passed: bool


def validate_reflection(R: Matrix, exact: bool = False) -> Tuple[float, str]:
    """
    Spectral-radius gate on R = M (I - V), M = diag(R).

    Returns (rho(|V|), completely_s) with completely_s one of `proven`
    (exact test run and passed), `implied` (rho < 1, exact test not run) or
    `failed`. The exact test runs only for m <= 12.
    """
    R = as_matrix(R, square=True)
    diagonal = np.diag(R)
    if np.any(diagonal <= 0.0):
        raise NonpositiveDiagonal(f"Reflection matrix diagonal {diagonal.tolist()} is not positive")
    V = np.eye(R.shape[0]) - R / diagonal[:, None]
    np.fill_diagonal(V, 0.0)
    rho = spectral_radius_abs(V)

    if exact and R.shape[0] <= EXACT_S_MAX_DIM:
        status = "proven" if complete_s_exact(R) else "failed"
    elif exact:
        logger.warning(f"Exact completely-S test skipped for m={R.shape[0]} > {EXACT_S_MAX_DIM}")
        status = "implied" if rho < 1.0 else "failed"
    else:
        status = "implied" if rho < 1.0 else "failed"
    return rho, status


def complete_s_exact(R: Matrix) -> bool:
    """
    Every principal submatrix A admits u >= 0 with A u > 0. Decided per
    submatrix by the LP: max t subject to A u >= t 1, 0 <= u <= 1.
    """
    R = as_matrix(R, square=True)
    m = R.shape[0]
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            A = R[np.ix_(subset, subset)]
            cost = np.zeros(size + 1)
            cost[-1] = -1.0
            # -A u + t <= 0
            a_ub = np.hstack([-A, np.ones((size, 1))])
            bounds = [(0.0, 1.0)] * size + [(None, None)]
            result = linprog(cost, A_ub=a_ub, b_ub=np.zeros(size), bounds=bounds, method="highs")
            if result.status != 0 or -result.fun <= 1e-9:
                logger.debug(f"Principal submatrix on {list(subset)} is not an S-matrix")
                return False
    return True


def validate_drift_cone(R: Matrix, b: Vector) -> ConeCertificate:
    """
    alpha = -R^-1 b; the drift lies in the interior of the cone
    {-sum alpha_i d_i : alpha >= 0} iff alpha > 0. min alpha_i is the margin.
    """
    R = as_matrix(R, square=True)
    b = as_vector(b)
    alpha = -solve_linear(R, b)
    margin = float(np.min(alpha))
    return ConeCertificate(alpha, margin, margin > 0.0)


def validate_ellipticity(sigma: Matrix) -> float:
    sigma = as_matrix(sigma)
    return max(min_eigenvalue_sym(sigma @ sigma.T), 0.0)


def _sample_states(spec: ProblemSpec, n_samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    states = rng.uniform(0.0, SAMPLE_BOX, size=(n_samples, spec.m))
    return np.vstack([spec.x0[None, :], states])


def validate_spec(spec: ProblemSpec, exact: bool = False,
                  n_samples: int = SAMPLE_STATES, seed: int = 0) -> StabilityReport:
    """
    Runs every data-level check on a ProblemSpec. Callable coefficients are
    checked on the initial point plus `n_samples` uniform states of [0, 10]^m;
    a declared bound violation raises CoefficientBoundViolated.
    """
    reasons = []
    rho, completely_s = validate_reflection(spec.R, exact=exact)
    if rho >= 1.0:
        reasons.append(f"spectral radius of |V| is {rho:.6g} >= 1")
    if completely_s == "failed":
        reasons.append("reflection matrix is not completely-S")

    constant = spec.drift.is_constant and spec.diffusion.is_constant
    states = spec.x0[None, :] if constant else _sample_states(spec, n_samples, seed)

    alpha = None
    margin = None
    try:
        certificates = [validate_drift_cone(spec.R, spec.drift.evaluate(x)) for x in states]
    except SingularMatrix as e:
        reasons.append(f"reflection matrix is singular: {e}")
    else:
        worst = min(certificates, key=lambda certificate: certificate.margin)
        alpha = worst.alpha.tolist()
        margin = worst.margin
        if not worst.passed:
            reasons.append(f"drift outside the interior of the cone, min alpha = {margin:.6g}")

    ellipticity = min(validate_ellipticity(spec.diffusion.evaluate(x)) for x in states)
    if ellipticity <= ELLIPTICITY_TOL:
        reasons.append(f"diffusion is degenerate, min eigenvalue of sigma sigma' = {ellipticity:.3e}")

    report = StabilityReport(
        label=spec.label,
        m=spec.m,
        spectral_radius=rho,
        completely_s=completely_s,
        cone_certificate=alpha,
        cone_margin=margin,
        min_ellipticity=ellipticity,
        overall="pass" if not reasons else "fail",
        reasons=reasons,
    )
    if reasons:
        logger.info(f"Spec '{spec.label}' failed validation: {'; '.join(reasons)}")
    else:
        logger.info(f"Spec '{spec.label}' passed validation, rho(|V|)={rho:.6g}, margin={margin:.6g}")
    return report


def spec_hash(spec: ProblemSpec) -> str:
    return canonical_hash({
        "R": spec.R.tolist(),
        "drift": spec.drift.describe(),
        "diffusion": spec.diffusion.describe(),
        "x0": spec.x0.tolist(),
        "label": spec.label,
    })
