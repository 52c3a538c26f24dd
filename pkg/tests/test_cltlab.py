import numpy as np
import pytest

from rbm_stationary.cltlab import (
    TestFunction,
    build_test_function,
    clt_study,
    echeverria_residual,
    face_derivative,
    generator_apply,
    lambda_diagnostics,
    register_echeverria_sinks,
    regime_of,
    third_moment_integrand,
)
from rbm_stationary.exceptions import MissingDerivative, SinksNotRegistered
from rbm_stationary.measure import BoundaryMeasure, WeightedMeasure
from rbm_stationary.models.config import SkorokhodConfig, TestFunctionSection
from rbm_stationary.noise import NoiseModel
from rbm_stationary.problem import ProblemSpec
from rbm_stationary.scheme import ChainSinks, ChainState, StepSchedule, run
from .asserts_test import assert_close


def test_lambda_diagnostics():
    assert lambda_diagnostics(StepSchedule(exponent=1.0), 1) == (1.0, 1.0, 1.0)
    total, three_halves, ratio = lambda_diagnostics(StepSchedule(exponent=0.5), 4)
    assert total == pytest.approx(2.78446, abs=1e-5)
    assert three_halves == pytest.approx(2.3869, abs=1e-4)
    assert ratio == pytest.approx(1.4305, abs=1e-4)


def test_ratio_decreases_for_fast_steps():
    schedule = StepSchedule(exponent=0.7)
    ratios = [lambda_diagnostics(schedule, n)[2] for n in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert ratios[0] > ratios[1] > ratios[2]
    assert schedule.k == 0


def test_regimes():
    assert regime_of(StepSchedule(exponent=0.7), 100) == "fast"
    assert regime_of(StepSchedule(exponent=0.5), 100) == "critical"
    assert regime_of(StepSchedule(exponent=0.3), 100) == "slow"
    harmonic = StepSchedule(kind="explicit", steps=[1.0 / k for k in range(1, 1001)])
    assert regime_of(harmonic, 1000) == "fast"


def test_generator_on_linear_function(tandem_spec):
    f = TestFunction.coordinate(0, 2)
    assert generator_apply(tandem_spec, f, np.array([2.0, 3.0])) == -1.0


def test_generator_on_half_square_norm():
    spec = ProblemSpec.create(np.eye(2), np.zeros(2), np.eye(2))
    assert generator_apply(spec, TestFunction.half_square_norm(2), np.array([0.4, 1.3])) == pytest.approx(1.0)


def test_face_derivatives(tandem_spec):
    spec = ProblemSpec.create(np.eye(2), -np.ones(2), np.eye(2))
    assert face_derivative(spec, TestFunction.coordinate(1, 2), 1, np.array([1.0, 0.0])) == 1.0
    total = TestFunction("sum", lambda x: float(np.sum(x)), lambda x: np.ones(2))
    assert face_derivative(tandem_spec, total, 0, np.array([0.0, 1.0])) == 0.0
    bump = TestFunction.bump([3.0, 3.0], 1.0)
    assert bump.compact_interior
    assert face_derivative(tandem_spec, bump, 0, np.array([0.0, 3.0])) == 0.0


def test_bump_derivatives_match_differences():
    bump = TestFunction.bump([2.0, 2.0], 1.0)
    x = np.array([2.3, 1.8])
    numeric = TestFunction("numeric", bump.value)
    assert_close(bump.gradient(x), numeric.gradient(x), 1e-6, "gradient")
    from_gradient = TestFunction("from gradient", bump.value, bump.gradient)
    assert_close(bump.hessian(x), from_gradient.hessian(x), 1e-6, "hessian")
    from_hessian = TestFunction("from hessian", bump.value, bump.gradient, bump.hessian)
    assert_close(bump.third(x), from_hessian.third(x), 1e-5, "third derivative")
    assert bump.value(np.array([3.5, 2.0])) == 0.0


def test_missing_derivative():
    f = TestFunction("plain", lambda x: float(x[0]), h=None)
    with pytest.raises(MissingDerivative):
        f.hessian(np.ones(2))


def test_build_test_function():
    f = build_test_function(TestFunctionSection(kind="bump", radius=0.5), 2)
    assert f.compact_interior
    assert f.value(np.array([0.75, 0.75])) == pytest.approx(np.exp(-1.0))
    assert build_test_function(TestFunctionSection(kind="coordinate", index=1, name="q"), 2).name == "q"
    with pytest.raises(ValueError):
        build_test_function(TestFunctionSection(kind="coordinate", index=2), 2)
    with pytest.raises(ValueError):
        build_test_function(TestFunctionSection(kind="bump", center=[1.0, 1.0, 1.0]), 2)


def test_third_moment_integrand():
    spec = ProblemSpec.create(np.eye(2), -np.ones(2), np.eye(2))
    assert third_moment_integrand(spec, TestFunction.cubic_coordinate(0, 2), np.array([1.0, 1.0])) == 6.0


def _chain_with_sinks(spec, f, n_steps, seed=2):
    measure, boundary = WeightedMeasure(spec.m), BoundaryMeasure(spec.m)
    register_echeverria_sinks(spec, f, measure, boundary)
    state = ChainState.create(spec, StepSchedule(exponent=0.5), seed, 0)
    run(spec, NoiseModel(), SkorokhodConfig(), n_steps, ChainSinks(measure, boundary), state)
    return measure, boundary


def test_echeverria_of_zero_function(tandem_spec):
    zero = TestFunction("zero", lambda x: 0.0, lambda x: np.zeros(2), lambda x: np.zeros((2, 2)))
    measure, boundary = _chain_with_sinks(tandem_spec, zero, 200)
    assert echeverria_residual(measure, boundary, zero).residual == 0.0


def test_echeverria_of_first_coordinate(tandem_spec):
    f = TestFunction.coordinate(0, 2)
    measure, boundary = _chain_with_sinks(tandem_spec, f, 500)
    result = echeverria_residual(measure, boundary, f)
    assert result.interior == pytest.approx(-1.0)
    # d_2 = (0, 1) is orthogonal to grad x_1
    assert result.boundary[1] == 0.0
    face_mass = boundary.face_masses(measure.total_weight.value)[0]
    assert result.residual == pytest.approx(face_mass - 1.0)


def test_echeverria_needs_sinks(tandem_spec):
    measure = WeightedMeasure(2)
    measure.absorb(np.ones(2), 1.0)
    with pytest.raises(SinksNotRegistered):
        echeverria_residual(measure, BoundaryMeasure(2), TestFunction.coordinate(0, 2))


def test_clt_study_symmetric_noise(tandem_spec):
    section = TestFunctionSection(kind="half_square_norm")
    report = clt_study(tandem_spec, StepSchedule(exponent=0.7), section, replications=4, n_steps=200, seed=3)
    summary = report.summary
    assert [result.replication for result in report.replications] == [0, 1, 2, 3]
    assert summary.regime == "fast"
    assert summary.predicted_mean == 0.0
    assert summary.m_tilde == 0.0
    assert summary.statistic_variance >= 0.0
    assert summary.plugin_variance > 0.0
    assert summary.slow_statistic_mean is None


def test_clt_study_asymmetric_noise():
    spec = ProblemSpec.create(np.eye(2), -np.ones(2), np.eye(2))
    section = TestFunctionSection(kind="cubic_coordinate", index=0)
    report = clt_study(spec, StepSchedule(exponent=0.5), section, replications=2, n_steps=100,
                       noise=NoiseModel("two_point_asymmetric", 0.2), boundary=True)
    summary = report.summary
    # D^3 x_1^3 = 6 everywhere, E U^3 = 1.5
    assert summary.m_tilde == pytest.approx(-1.5)
    assert summary.regime == "critical"
    assert summary.predicted_mean == pytest.approx(summary.lambda_ratio * summary.m_tilde)
    assert summary.echeverria_residual is not None


def test_clt_study_slow_statistic(tandem_spec):
    section = TestFunctionSection(kind="coordinate", index=0)
    report = clt_study(tandem_spec, StepSchedule(exponent=0.3), section, replications=2, n_steps=50)
    assert report.summary.regime == "slow"
    assert report.summary.predicted_mean is None
    # A x_1 = -1 everywhere, so Lambda / Lambda^(3/2) * nu(A x_1) is known per replication
    expected = np.mean([-r.total_weight / r.total_weight_three_halves for r in report.replications])
    assert report.summary.slow_statistic_mean == pytest.approx(expected)


def test_clt_study_needs_two_replications(tandem_spec):
    with pytest.raises(ValueError):
        clt_study(tandem_spec, StepSchedule(), TestFunctionSection(kind="half_square_norm"), 1, 10)
