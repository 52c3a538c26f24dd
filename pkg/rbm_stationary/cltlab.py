"""
Rate-of-convergence experiments for sqrt(Lambda_n) nu_n(A phi) and the
Echeverria residual nu_n(A f) + sum_i mu_n^i(D_i f).

A f(x)   = b(x) . grad f(x) + 1/2 tr(sigma(x)' D^2 f(x) sigma(x))
D_i f(x) = d_i . grad f(x)
"""
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import stats

from rbm_stationary.exceptions import MissingDerivative, SinksNotRegistered
from rbm_stationary.measure import BoundaryMeasure, WeightedMeasure
from rbm_stationary.models.config import HistogramSection, SkorokhodConfig, TestFunctionSection
from rbm_stationary.models.reports import CltSummaryModel
from rbm_stationary.noise import NoiseModel
from rbm_stationary.numerics import Vector
from rbm_stationary.problem import ProblemSpec
from rbm_stationary.scheme import ChainSinks, ChainState, StepSchedule, run

__all__ = [
    "CltReplication",
    "CltReport",
    "CltTask",
    "EcheverriaResidual",
    "TestFunction",
    "build_test_function",
    "clt_replication",
    "clt_study",
    "echeverria_residual",
    "face_derivative",
    "generator_apply",
    "lambda_diagnostics",
    "register_echeverria_sinks",
    "regime_of",
]

logger = logging.getLogger(__name__)

FD_STEP = 1e-4
# exp(-p) underflows to 0 beyond this
BUMP_P_MAX = 700.0


class TestFunction:
    """
    A test function with analytic derivatives where available. Missing
    derivatives fall back to central differences of the next lower order with
    step `h`; with h=None a missing derivative raises MissingDerivative.

    `compact_interior` marks functions supported strictly inside the orthant,
    which satisfy every boundary condition of the CLT automatically.
    """
    __test__ = False

    def __init__(self, name: str, value: Callable[[Vector], float],
                 gradient: Callable[[Vector], Vector] = None,
                 hessian: Callable[[Vector], np.ndarray] = None,
                 third: Callable[[Vector], np.ndarray] = None,
                 compact_interior: bool = False, h: Optional[float] = FD_STEP):
        self.name = name
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._third = third
        self.compact_interior = compact_interior
        self.h = h

    def __call__(self, x: Vector) -> float:
        return self.value(x)

    def value(self, x: Vector) -> float:
        return float(self._value(np.asarray(x, dtype=float)))

    def gradient(self, x: Vector) -> Vector:
        x = np.asarray(x, dtype=float)
        if self._gradient is not None:
            return np.asarray(self._gradient(x), dtype=float)
        return self._central_difference(self.value, x, "gradient")

    def hessian(self, x: Vector) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._hessian is not None:
            return np.asarray(self._hessian(x), dtype=float)
        H = self._central_difference(self.gradient, x, "hessian")
        return 0.5 * (H + H.T)

    def third(self, x: Vector) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._third is not None:
            return np.asarray(self._third(x), dtype=float)
        return self._central_difference(self.hessian, x, "third derivative")

    def _central_difference(self, fn: Callable, x: Vector, what: str) -> np.ndarray:
        if self.h is None:
            raise MissingDerivative(f"Test function '{self.name}' has no {what} and no fallback step")
        columns = []
        for j in range(x.shape[0]):
            e = np.zeros_like(x)
            e[j] = self.h
            columns.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * self.h))
        # derivative index goes last
        return np.stack(columns, axis=-1)

    def __repr__(self) -> str:
        return f"TestFunction({self.name!r})"

    @staticmethod
    def coordinate(index: int, m: int) -> "TestFunction":
        unit = np.zeros(m)
        unit[index] = 1.0
        return TestFunction(
            name=f"x{index}",
            value=lambda x: x[index],
            gradient=lambda x: unit.copy(),
            hessian=lambda x: np.zeros((m, m)),
            third=lambda x: np.zeros((m, m, m)),
        )

    @staticmethod
    def half_square_norm(m: int) -> "TestFunction":
        return TestFunction(
            name="half_square_norm",
            value=lambda x: 0.5 * float(x @ x),
            gradient=lambda x: x.copy(),
            hessian=lambda x: np.eye(m),
            third=lambda x: np.zeros((m, m, m)),
        )

    @staticmethod
    def cubic_coordinate(index: int, m: int) -> "TestFunction":
        def gradient(x):
            g = np.zeros(m)
            g[index] = 3.0 * x[index] ** 2
            return g

        def hessian(x):
            H = np.zeros((m, m))
            H[index, index] = 6.0 * x[index]
            return H

        def third(x):
            T = np.zeros((m, m, m))
            T[index, index, index] = 6.0
            return T

        return TestFunction(f"x{index}^3", lambda x: x[index] ** 3, gradient, hessian, third)

    @staticmethod
    def bump(center: Sequence[float], radius: float) -> "TestFunction":
        """
        exp(-1 / (1 - |x - c|^2 / r^2)) inside the ball, 0 outside
        """
        center = np.asarray(center, dtype=float)
        m = center.shape[0]
        q = 2.0 / radius ** 2

        def profile(x):
            y = x - center
            s = float(y @ y) / radius ** 2
            if s >= 1.0:
                return y, None
            p = 1.0 / (1.0 - s)
            if p > BUMP_P_MAX:
                return y, None
            return y, p

        def value(x):
            _, p = profile(x)
            return 0.0 if p is None else np.exp(-p)

        def gradient(x):
            y, p = profile(x)
            if p is None:
                return np.zeros(m)
            g = np.exp(-p)
            return -p ** 2 * g * q * y

        def hessian(x):
            y, p = profile(x)
            if p is None:
                return np.zeros((m, m))
            g = np.exp(-p)
            g1 = -p ** 2 * g
            g2 = g * (p ** 4 - 2.0 * p ** 3)
            return g2 * q ** 2 * np.outer(y, y) + g1 * q * np.eye(m)

        def third(x):
            y, p = profile(x)
            if p is None:
                return np.zeros((m, m, m))
            g = np.exp(-p)
            g2 = g * (p ** 4 - 2.0 * p ** 3)
            g3 = g * (-p ** 6 + 6.0 * p ** 5 - 6.0 * p ** 4)
            eye = np.eye(m)
            sym = (np.einsum("ab,c->abc", eye, y) + np.einsum("ac,b->abc", eye, y)
                   + np.einsum("bc,a->abc", eye, y))
            return g3 * q ** 3 * np.einsum("a,b,c->abc", y, y, y) + g2 * q ** 2 * sym

        return TestFunction("bump", value, gradient, hessian, third,
                            compact_interior=bool(np.min(center) > radius))

    @staticmethod
    def exp_moment(zeta: float, m: int) -> "TestFunction":
        """
        exp(zeta |x|), the integrability monitor. Second and third derivatives
        come from finite differences.
        """
        def value(x):
            return np.exp(zeta * np.linalg.norm(x))

        def gradient(x):
            r = np.linalg.norm(x)
            if r == 0.0:
                return np.zeros(m)
            return zeta * np.exp(zeta * r) * x / r

        return TestFunction(f"exp({zeta}|x|)", value, gradient)


def build_test_function(section: TestFunctionSection, m: int) -> TestFunction:
    if section.index >= m and section.kind in ("coordinate", "cubic_coordinate"):
        raise ValueError(f"Coordinate index {section.index} out of range for m={m}")
    if section.kind == "coordinate":
        f = TestFunction.coordinate(section.index, m)
    elif section.kind == "half_square_norm":
        f = TestFunction.half_square_norm(m)
    elif section.kind == "cubic_coordinate":
        f = TestFunction.cubic_coordinate(section.index, m)
    elif section.kind == "bump":
        center = section.center if section.center is not None else [1.5 * section.radius] * m
        if len(center) != m:
            raise ValueError(f"Bump center of length {len(center)} does not fit m={m}")
        f = TestFunction.bump(center, section.radius)
    else:
        f = TestFunction.exp_moment(section.zeta, m)
    if section.name:
        f.name = section.name
    return f


def generator_apply(spec: ProblemSpec, f: TestFunction, x: Vector) -> float:
    x = np.asarray(x, dtype=float)
    b = spec.drift.evaluate(x)
    sigma = spec.diffusion.evaluate(x)
    return float(b @ f.gradient(x) + 0.5 * np.trace(sigma.T @ f.hessian(x) @ sigma))


def face_derivative(spec: ProblemSpec, f: TestFunction, i: int, x: Vector) -> float:
    return float(spec.R[:, i] @ f.gradient(x))


def gradient_energy(spec: ProblemSpec, f: TestFunction, x: Vector) -> float:
    """
    |sigma(x)' grad f(x)|^2, the integrand of the asymptotic variance
    """
    g = spec.diffusion.evaluate(x).T @ f.gradient(x)
    return float(g @ g)


def third_moment_integrand(spec: ProblemSpec, f: TestFunction, x: Vector) -> float:
    """
    sum_j sum_abc D^3_abc f(x) sigma_aj sigma_bj sigma_cj; times the third
    moment of the noise this is E[D^3 f(x) (sigma(x) U)^(x3)] for independent
    coordinates.
    """
    sigma = spec.diffusion.evaluate(x)
    return float(np.einsum("abc,aj,bj,cj->", f.third(x), sigma, sigma, sigma))


def sink_names(f: TestFunction) -> Dict[str, str]:
    return {
        "generator": f"A[{f.name}]",
        "energy": f"grad2[{f.name}]",
        "third": f"m3[{f.name}]",
        "face": f"D[{f.name}]",
    }


def register_echeverria_sinks(spec: ProblemSpec, f: TestFunction, measure: WeightedMeasure,
                              boundary: BoundaryMeasure) -> None:
    names = sink_names(f)
    measure.register_sink(names["generator"], lambda x: generator_apply(spec, f, x))
    boundary.register_sink(names["face"], lambda i, x: face_derivative(spec, f, i, x))


class EcheverriaResidual(NamedTuple):
    residual: float
    interior: float
    boundary: np.ndarray


def echeverria_residual(measure: WeightedMeasure, boundary: BoundaryMeasure,
                        f: TestFunction) -> EcheverriaResidual:
    """
    r_n(f) = nu_n(A f) + sum_i mu_n^i(D_i f), from sinks registered with
    register_echeverria_sinks before the run.
    """
    names = sink_names(f)
    if names["generator"] not in measure.sink_sums or boundary is None \
            or names["face"] not in boundary.sink_sums:
        raise SinksNotRegistered(
            f"Echeverria residual of '{f.name}' needs the sinks {names['generator']} and {names['face']}"
        )
    total = measure.total_weight.value
    interior = measure.integrate(names["generator"])
    faces = boundary.integrate(names["face"], total)
    return EcheverriaResidual(interior + float(np.sum(faces)), interior, faces)


def lambda_diagnostics(schedule: StepSchedule, n: int) -> Tuple[float, float, float]:
    """
    (Lambda_n, Lambda_n^(3/2), Lambda_n^(3/2) / sqrt(Lambda_n)) of a fresh copy of the schedule
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    params = schedule.describe()
    fresh = StepSchedule(params["kind"], params["c"], params["exponent"], params["steps"], params["alphas"])
    for _ in range(n):
        fresh.advance()
    total = fresh.total_weight
    three_halves = fresh.weight_power(1.5)
    return total, three_halves, three_halves / np.sqrt(total)


def regime_of(schedule: StepSchedule, n: int) -> str:
    """
    fast when Lambda^(3/2) / sqrt(Lambda) -> 0, slow when it diverges, critical
    when it has a finite positive limit. For power schedules this is decided
    by the exponent (above, below or equal to 1/2); explicit schedules are
    classified by the ratio trend between n/10 and n.
    """
    if schedule.kind == "power":
        if schedule.exponent > 0.5:
            return "fast"
        if schedule.exponent < 0.5:
            return "slow"
        return "critical"
    early = lambda_diagnostics(schedule, max(1, n // 10))[2]
    late = lambda_diagnostics(schedule, n)[2]
    if late < 0.9 * early:
        return "fast"
    if late > 1.1 * early:
        return "slow"
    return "critical"


class CltTask(NamedTuple):
    spec: ProblemSpec
    function: TestFunctionSection
    schedule: Dict[str, Any]
    law: str
    p: float
    skorokhod: SkorokhodConfig
    n_steps: int
    seed: int
    replication: int
    boundary: bool


class CltReplication(NamedTuple):
    replication: int
    total_weight: float
    total_weight_three_halves: float
    generator_mean: float
    statistic: float
    plugin_variance: float
    third_term: float
    echeverria: Optional[float]
    truncations: int


class CltReport(NamedTuple):
    replications: List[CltReplication]
    summary: CltSummaryModel


def clt_replication(task: CltTask) -> CltReplication:
    """
    One chain of a CLT study. Takes only picklable inputs so it can run in a
    worker process.
    """
    spec = task.spec
    f = build_test_function(task.function, spec.m)
    params = task.schedule
    schedule = StepSchedule(params["kind"], params["c"], params["exponent"], params["steps"], params["alphas"])
    names = sink_names(f)
    measure = WeightedMeasure(spec.m, HistogramSection(bins=1, x_max=1.0))
    boundary = BoundaryMeasure(spec.m) if task.boundary else None
    if boundary is not None:
        register_echeverria_sinks(spec, f, measure, boundary)
    else:
        measure.register_sink(names["generator"], lambda x: generator_apply(spec, f, x))
    measure.register_sink(names["energy"], lambda x: gradient_energy(spec, f, x))
    measure.register_sink(names["third"], lambda x: third_moment_integrand(spec, f, x))

    state = ChainState.create(spec, schedule, task.seed, task.replication)
    model = NoiseModel(task.law, task.p)
    logger.info(f"CLT replication {task.replication} started, n={task.n_steps}")
    run(spec, model, task.skorokhod, task.n_steps, ChainSinks(measure, boundary), state)

    total = schedule.total_weight
    generator_mean = measure.integrate(names["generator"])
    residual = None
    if boundary is not None:
        residual = echeverria_residual(measure, boundary, f).residual
    return CltReplication(
        replication=task.replication,
        total_weight=total,
        total_weight_three_halves=schedule.weight_power(1.5),
        generator_mean=generator_mean,
        statistic=float(np.sqrt(total) * generator_mean),
        plugin_variance=measure.integrate(names["energy"]),
        third_term=measure.integrate(names["third"]),
        echeverria=residual,
        truncations=state.truncation_count,
    )


def clt_study(spec: ProblemSpec, schedule: StepSchedule, function: TestFunctionSection,
              replications: int, n_steps: int, noise: NoiseModel = None, seed: int = 0,
              cfg: SkorokhodConfig = None, boundary: bool = False,
              executor_map: Callable[[Callable, Iterable], Iterable] = map) -> CltReport:
    """
    Runs independent replications and summarizes sqrt(Lambda_n) nu_n(A phi):
    mean, variance against the plug-in nu_n(|sigma' grad phi|^2), skewness,
    excess kurtosis, Kolmogorov distance of the standardized statistics to
    N(0, 1) and the third-moment term m~. Results are ordered by replication
    whatever `executor_map` does.
    """
    if replications < 2:
        raise ValueError(f"A CLT study needs at least 2 replications, got {replications}")
    noise = noise or NoiseModel()
    cfg = cfg or SkorokhodConfig()
    tasks = [
        CltTask(spec, function, schedule.describe(), noise.law, noise.p, cfg, n_steps, seed, index, boundary)
        for index in range(replications)
    ]
    results = sorted(executor_map(clt_replication, tasks), key=lambda result: result.replication)

    statistics = np.array([result.statistic for result in results])
    plugin = float(np.mean([result.plugin_variance for result in results]))
    variance = float(np.var(statistics, ddof=1))
    mean = float(np.mean(statistics))
    spread = np.sqrt(variance) if variance > 0.0 else 1.0
    ks = float(stats.kstest((statistics - mean) / spread, "norm").statistic)
    m_tilde = -noise.third_moment / 6.0 * float(np.mean([result.third_term for result in results]))
    total, three_halves = results[0].total_weight, results[0].total_weight_three_halves
    regime = regime_of(schedule, n_steps)
    residuals = [result.echeverria for result in results if result.echeverria is not None]
    summary = CltSummaryModel(
        label=spec.label,
        regime=regime,
        schedule_exponent=schedule.exponent,
        n_steps=n_steps,
        replications=replications,
        total_weight=total,
        total_weight_three_halves=three_halves,
        lambda_ratio=three_halves / np.sqrt(total),
        statistic_mean=mean,
        statistic_variance=variance,
        plugin_variance=plugin,
        variance_ratio=variance / plugin if plugin > 0.0 else float("inf"),
        skewness=float(stats.skew(statistics)),
        excess_kurtosis=float(stats.kurtosis(statistics, fisher=True)),
        ks_to_normal=ks,
        m_tilde=m_tilde,
        predicted_mean=_predicted_mean(regime, m_tilde, three_halves / np.sqrt(total)),
        slow_statistic_mean=float(np.mean([
            result.total_weight / result.total_weight_three_halves * result.generator_mean
            for result in results
        ])) if regime == "slow" else None,
        echeverria_residual=float(np.mean(residuals)) if residuals else None,
    )
    logger.info(f"CLT study on '{spec.label}': regime={regime}, mean={mean:.4g}, "
                f"variance={variance:.4g}, plug-in={plugin:.4g}, m~={m_tilde:.4g}")
    return CltReport(results, summary)


def _predicted_mean(regime: str, m_tilde: float, lambda_ratio: float) -> Optional[float]:
    """
    Limit mean of sqrt(Lambda_n) nu_n(A phi): 0 for fast steps, lambda~ m~
    at the critical exponent; it diverges for slow steps.
    """
    if regime == "fast":
        return 0.0
    if regime == "critical":
        return lambda_ratio * m_tilde
    return None
