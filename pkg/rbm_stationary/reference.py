"""
Closed-form ground truths and the benchmark problems they belong to.
"""
from typing import List, NamedTuple, Optional, Tuple, Union
import logging

import numpy as np

from rbm_stationary.exceptions import ParameterOutOfRange, SingularMatrix
from rbm_stationary.models.config import SpecSection
from rbm_stationary.numerics import Matrix, Vector, as_matrix, as_vector, solve_linear
from rbm_stationary.problem import ProblemSpec

__all__ = [
    "BenchmarkExample",
    "ReferenceLaw",
    "SYMMETRIC_TABLE",
    "benchmark_examples",
    "example_by_name",
    "exponential_cdf",
    "exponential_quantile",
    "product_form_rates",
    "resolve_spec",
    "symmetric_srbm_m1",
]

logger = logging.getLogger(__name__)

# published stationary rates of the 3-d example; see ReferenceLaw.published_rates
PUBLISHED_PRODUCT_RATES = (1.1667, 1.0938, 0.8537)

# (rho, E[x_1]) for the 8-d symmetric family at r = 0.1
SYMMETRIC_TABLE = (
    (-0.1, 0.150),
    (-0.05, 0.166),
    (0.0, 0.182),
    (0.2, 0.246),
    (0.9, 0.468),
)

SKEW_SYMMETRY_TOL = 1e-10


class ReferenceLaw(NamedTuple):
    kind: str
    rates: Optional[Tuple[float, ...]] = None
    published_rates: Optional[Tuple[float, ...]] = None
    value: Optional[float] = None
    provenance: str = ""

    def m1(self) -> Optional[float]:
        """
        Reference E[x_1]
        """
        if self.kind == "scalar_moment":
            return self.value
        return 1.0 / self.rates[0]


class BenchmarkExample(NamedTuple):
    name: str
    spec: ProblemSpec
    law: Optional[ReferenceLaw]


def symmetric_srbm_m1(d: int, r: float, rho: float) -> float:
    """
    E[x_1] of the d-dimensional symmetric SRBM with unit variances,
    correlation rho, drift -1 and reflection matrix with off-diagonal -r.
    """
    if d < 2:
        raise ParameterOutOfRange(f"Symmetric family needs d >= 2, got {d}")
    if not -1.0 / (d - 1) < rho < 1.0:
        raise ParameterOutOfRange(f"rho={rho} outside (-1/(d-1), 1) = ({-1.0 / (d - 1):.6g}, 1)")
    if not 0.0 <= r < 1.0 / (d - 1):
        raise ParameterOutOfRange(f"r={r} outside [0, 1/(d-1)) = [0, {1.0 / (d - 1):.6g})")
    return (1.0 - (d - 2) * r + (d - 1) * r * rho) / (2.0 * (1.0 + r))


def product_form_rates(R: Matrix, b: Vector, covariance: Matrix) -> np.ndarray:
    """
    Exponential rates of the product-form stationary law,
    eta = -2 diag(covariance)^-1 diag(R) R^-1 b.

    Requires the skew-symmetry condition
    2 covariance = R D^-1 L + L D^-1 R' with D = diag(R), L = diag(covariance).
    """
    R = as_matrix(R, square=True)
    b = as_vector(b)
    covariance = as_matrix(covariance, square=True)
    D = np.diag(np.diag(R))
    L = np.diag(np.diag(covariance))
    D_inv = np.diag(1.0 / np.diag(R))
    mismatch = 2.0 * covariance - (R @ D_inv @ L + L @ D_inv @ R.T)
    if np.max(np.abs(mismatch)) > SKEW_SYMMETRY_TOL * max(1.0, float(np.max(np.abs(covariance)))):
        raise ParameterOutOfRange(
            f"Data does not satisfy the skew-symmetry condition, max mismatch {np.max(np.abs(mismatch)):.3e}"
        )
    try:
        alpha = -solve_linear(R, b)
    except SingularMatrix as e:
        raise ParameterOutOfRange(f"Reflection matrix is singular: {e}") from e
    rates = 2.0 * np.diag(D) * alpha / np.diag(L)
    if np.any(rates <= 0.0):
        raise ParameterOutOfRange(f"Non-positive rates {rates.tolist()}: no stationary law")
    return rates


def exponential_cdf(rate: float, x: Union[float, np.ndarray]):
    if rate <= 0.0:
        raise ValueError(f"Exponential rate must be positive, got {rate}")
    x = np.asarray(x, dtype=float)
    value = -np.expm1(-rate * np.maximum(x, 0.0))
    return float(value) if value.ndim == 0 else value


def exponential_quantile(rate: float, level: float) -> float:
    if rate <= 0.0:
        raise ValueError(f"Exponential rate must be positive, got {rate}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"Quantile level must lie in (0, 1), got {level}")
    return float(-np.log1p(-level) / rate)


def _product_3d() -> BenchmarkExample:
    Q = np.array([[0.0, 0.1, -0.2], [-0.1, 0.0, 0.0], [0.2, 0.0, 0.0]])
    R = np.eye(3) + Q
    b = -0.5 * np.ones(3)
    sigma = np.eye(3)
    spec = ProblemSpec.create(R, b, sigma, x0=np.ones(3), label="product-3d")
    rates = product_form_rates(R, b, sigma @ sigma.T)
    law = ReferenceLaw(
        kind="product_exponential",
        rates=tuple(float(rate) for rate in rates),
        published_rates=PUBLISHED_PRODUCT_RATES,
        provenance="product-form rates -2 R^-1 b; the published rates are the "
                   "reciprocal means obtained with R' in place of R",
    )
    return BenchmarkExample("product-3d", spec, law)


def _tandem_2d() -> BenchmarkExample:
    R = np.array([[1.0, 0.0], [-1.0, 1.0]])
    spec = ProblemSpec.create(R, np.array([-1.0, 0.0]), np.eye(2), x0=np.ones(2), label="tandem-2d")
    law = ReferenceLaw(kind="scalar_moment", value=0.5,
                       provenance="E[x_1] of the 2-d tandem SRBM, exponential(2) first marginal")
    return BenchmarkExample("tandem-2d", spec, law)


def symmetric_problem(d: int = 8, r: float = 0.1, rho: float = 0.0) -> ProblemSpec:
    """
    Unit drift towards the origin, covariance with unit diagonal and
    correlation rho, reflection matrix with unit diagonal and -r elsewhere.
    Builds for any r; admissibility is left to the validators.
    """
    covariance = np.full((d, d), rho)
    np.fill_diagonal(covariance, 1.0)
    try:
        sigma = np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError as e:
        raise ParameterOutOfRange(f"Correlation rho={rho} does not give a covariance matrix in d={d}") from e
    R = np.full((d, d), -r)
    np.fill_diagonal(R, 1.0)
    return ProblemSpec.create(R, -np.ones(d), sigma, x0=np.ones(d), label=f"symmetric-{d}d(r={r}, rho={rho})")


def _symmetric_8d(r: float, rho: float) -> BenchmarkExample:
    spec = symmetric_problem(8, r, rho)
    try:
        law = ReferenceLaw(kind="scalar_moment", value=symmetric_srbm_m1(8, r, rho),
                           provenance="closed-form E[x_1] of the symmetric family")
    except ParameterOutOfRange as e:
        logger.info(f"No reference value for {spec.label}: {e}")
        law = None
    return BenchmarkExample("symmetric-8d", spec, law)


def benchmark_examples(r: float = 0.1, rho: float = 0.0) -> List[BenchmarkExample]:
    return [_product_3d(), _tandem_2d(), _symmetric_8d(r, rho)]


def example_by_name(name: str, r: float = 0.1, rho: float = 0.0) -> BenchmarkExample:
    if name == "product-3d":
        return _product_3d()
    if name == "tandem-2d":
        return _tandem_2d()
    if name == "symmetric-8d":
        return _symmetric_8d(r, rho)
    raise ValueError(f"Unknown benchmark example: {name}")


def resolve_spec(section: SpecSection) -> Tuple[ProblemSpec, Optional[ReferenceLaw]]:
    """
    ProblemSpec and, for named examples, the reference law of a config spec section
    """
    if section.name is not None:
        example = example_by_name(section.name, section.r, section.rho)
        spec = example.spec
        if section.x0 is not None:
            spec = ProblemSpec(spec.R, spec.drift, spec.diffusion, x0=section.x0, label=spec.label)
        return spec, example.law
    spec = ProblemSpec.create(
        section.reflection,
        np.array(section.drift, dtype=float),
        np.array(section.diffusion, dtype=float),
        x0=section.x0,
        label=section.label or "inline",
    )
    return spec, None
