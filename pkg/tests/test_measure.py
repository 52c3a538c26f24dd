import math

import numpy as np
import pytest

from rbm_stationary.exceptions import (
    ConfigMismatch,
    EmptyMeasure,
    MeasureError,
    UnregisteredFunctionInStreamingMode,
)
from rbm_stationary.measure import BoundaryMeasure, WeightedMeasure, WeightedReservoir, gauss_legendre_unit
from rbm_stationary.models.config import HistogramSection, SkorokhodConfig
from rbm_stationary.noise import NoiseModel, RngStream
from rbm_stationary.reference import exponential_cdf, exponential_quantile
from rbm_stationary.scheme import ChainSinks, ChainState, StepSchedule, run
from rbm_stationary.skorokhod import reflect
from .asserts_test import assert_close, assert_unit_mass


def test_weighted_average(measure_1d):
    def square(x):
        return float(x[0] ** 2)

    measure_1d.register_sink("square", square)
    measure_1d.absorb(np.array([1.0]), 1.0)
    measure_1d.absorb(np.array([4.0]), 0.5)
    assert measure_1d.integrate("square") == pytest.approx((1.0 + 0.5 * 16.0) / 1.5)
    assert measure_1d.integrate(square) == measure_1d.integrate("square")
    assert measure_1d.integrate(lambda x: x[0]) == pytest.approx((1.0 + 0.5 * 4.0) / 1.5)
    assert_unit_mass(measure_1d)


def test_single_atom_mean(measure_2d):
    measure_2d.absorb(np.array([0.3, 2.5]), 0.25)
    assert np.array_equal(measure_2d.mean(), [0.3, 2.5])


def test_constant_atoms_have_zero_variance(measure_2d):
    weights = [k ** -0.5 for k in range(1, 10 ** 4 + 1)]
    measure_2d.absorb_many(np.tile([1.7, 0.2], (10 ** 4, 1)), weights)
    assert np.all(np.abs(measure_2d.variance()) <= 1e-12)
    assert_unit_mass(measure_2d)


def test_coordinate_sink():
    measure = WeightedMeasure(1)
    measure.register_sink("x", lambda x: x[0])
    measure.absorb(np.array([1.0]), 1.0)
    measure.absorb(np.array([3.0]), 1.0)
    assert measure.integrate("x") == 2.0


def test_unregistered_function(measure_2d):
    measure_2d.absorb(np.array([1.0, 1.0]), 1.0)
    with pytest.raises(UnregisteredFunctionInStreamingMode):
        measure_2d.integrate(lambda x: x[0])
    with pytest.raises(UnregisteredFunctionInStreamingMode):
        measure_2d.integrate("missing")


def test_late_registration(measure_2d):
    measure_2d.absorb(np.array([1.0, 1.0]), 1.0)
    with pytest.raises(MeasureError):
        measure_2d.register_sink("late", lambda x: 1.0)


def test_empty_measure(measure_2d):
    with pytest.raises(EmptyMeasure):
        measure_2d.mean()
    with pytest.raises(EmptyMeasure):
        measure_2d.marginal_stats(0)


def test_streaming_sink_matches_replay():
    rng = np.random.default_rng(4)
    measure = WeightedMeasure(2, keep_atoms=True)
    measure.register_sink("f", lambda x: math.sin(x[0]) + x[1] ** 2)
    for k in range(1, 501):
        measure.absorb(rng.exponential(size=2), k ** -0.7)
    replayed = sum(w * (math.sin(x[0]) + x[1] ** 2) for x, w in measure.atom_log) \
        / sum(w for _, w in measure.atom_log)
    assert abs(measure.integrate("f") - replayed) <= 1e-10


def test_moments():
    measure = WeightedMeasure(1)
    measure.absorb(np.array([1.0]), 1.0)
    measure.absorb(np.array([3.0]), 3.0)
    assert measure.raw_moment(2)[0] == pytest.approx((1.0 + 27.0) / 4.0)
    assert measure.variance()[0] == pytest.approx(0.75)
    assert measure.cross_moment()[0, 0] == pytest.approx(7.0)
    with pytest.raises(ValueError):
        measure.raw_moment(5)


def test_atom_at_zero():
    measure = WeightedMeasure(1)
    measure.absorb(np.array([0.0]), 1.0)
    stats = measure.marginal_stats(0, lambda x: exponential_cdf(1.0, x))
    assert stats.cdf[0] == 1.0
    assert stats.ks == 1.0


def test_lower_median():
    measure = WeightedMeasure(1)
    measure.absorb(np.array([0.0]), 1.0)
    measure.absorb(np.array([math.log(2.0)]), 1.0)
    assert measure.quantile(0, 0.5) == 0.0
    assert 0.0 < measure.quantile(0, 0.75) <= math.log(2.0) + 0.01


def test_exponential_samples_ks():
    samples = np.random.default_rng(1).exponential(size=10 ** 5)
    measure = WeightedMeasure(1)
    measure.absorb_many(samples[:, None], np.ones(samples.shape[0]))
    stats = measure.marginal_stats(0, lambda x: exponential_cdf(1.0, x))
    assert stats.ks <= 0.01
    assert stats.quantiles[0.5] == pytest.approx(math.log(2.0), abs=0.02)


def test_density_of_two_atoms(small_histogram):
    measure = WeightedMeasure(1, small_histogram)
    measure.absorb(np.array([0.0]), 1.0)
    measure.absorb(np.array([0.975]), 3.0)
    measure.absorb(np.array([7.0]), 4.0)
    edges, density = measure.density_grid(0)
    assert len(density) == small_histogram.bins
    # the face atom lands in [0, 0.05], 0.975 in (0.95, 1], 7 beyond x_max
    assert density[0] == pytest.approx(0.125 / 0.05)
    assert density[19] == pytest.approx(0.375 / 0.05)
    assert np.sum(density * np.diff(edges)) == pytest.approx(0.5)


def test_exponential_samples_density():
    samples = np.random.default_rng(2).exponential(size=10 ** 5)
    measure = WeightedMeasure(1, HistogramSection(bins=100, x_max=5.0))
    measure.absorb_many(samples[:, None], np.ones(samples.shape[0]))
    edges, density = measure.density_grid(0)
    exact = np.diff(exponential_cdf(1.0, edges)) / np.diff(edges)
    assert_close(density[:40], exact[:40], 0.06, "histogram density")
    assert measure.quantile(0, 0.9) == pytest.approx(exponential_quantile(1.0, 0.9), abs=0.05)


def _filled(seed, n=200):
    rng = np.random.default_rng(seed)
    measure = WeightedMeasure(2, HistogramSection(bins=50, x_max=5.0))
    measure.register_sink("sum", lambda x: float(np.sum(x)))
    for k in range(1, n + 1):
        measure.absorb(rng.exponential(size=2), k ** -0.5)
    return measure


def test_merge_with_empty_is_identity():
    a = _filled(1)
    empty = WeightedMeasure(2, HistogramSection(bins=50, x_max=5.0))
    empty.register_sink("sum", lambda x: float(np.sum(x)))
    merged = a.merge(empty)
    assert np.array_equal(merged.mean(), a.mean())
    assert merged.count == a.count


def test_merge_commutes_and_adds_mass():
    a, b = _filled(1), _filled(2, n=300)
    ab, ba = a.merge(b), b.merge(a)
    assert_close(ab.mean(), ba.mean(), 1e-13, "merged mean")
    assert_close(ab.variance(), ba.variance(), 1e-12, "merged variance")
    assert ab.total_weight.value == pytest.approx(a.total_weight.value + b.total_weight.value, rel=1e-14)
    assert ab.integrate("sum") == pytest.approx(ba.integrate("sum"), rel=1e-13)
    assert_unit_mass(ab)


def test_merge_config_mismatch():
    with pytest.raises(ConfigMismatch):
        _filled(1).merge(WeightedMeasure(2, HistogramSection(bins=10, x_max=5.0)))


def test_state_round_trip():
    measure = _filled(3)
    restored = WeightedMeasure.from_state(measure.get_state(), measure.sinks)
    assert restored.get_state() == measure.get_state()
    with pytest.raises(ConfigMismatch):
        WeightedMeasure.from_state(measure.get_state())


def test_reservoir_capacity_and_state():
    reservoir = WeightedReservoir(10, RngStream(0, 0, 1))
    for k in range(1, 101):
        reservoir.offer(np.array([float(k)]), 1.0 / k)
    assert reservoir.atoms().shape == (10, 1)
    restored = WeightedReservoir.from_state(reservoir.get_state())
    reservoir.offer(np.array([0.5]), 2.0)
    restored.offer(np.array([0.5]), 2.0)
    assert np.array_equal(restored.atoms(), reservoir.atoms())


def test_reservoir_estimate():
    stream = RngStream(5, 0, 1)
    measure = WeightedMeasure(1, reservoir=WeightedReservoir(64, stream))
    for k in range(1, 201):
        measure.absorb(np.array([2.0]), k ** -0.5)
    assert measure.integrate(lambda x: x[0]) == 2.0


def test_gauss_legendre_nodes():
    nodes, weights = gauss_legendre_unit(3)
    assert np.all((nodes > 0.0) & (nodes < 1.0))
    assert np.sum(weights) == pytest.approx(1.0)
    assert np.sum(weights * nodes ** 5) == pytest.approx(1.0 / 6.0)


def test_boundary_ignores_interior_steps(skorokhod_cfg):
    boundary = BoundaryMeasure(1)
    boundary.absorb_boundary(reflect(np.array([1.0]), np.array([-0.3]), np.eye(1), skorokhod_cfg))
    assert boundary.steps_with_push == 0
    assert_close(boundary.mass.value, [0.0], 0.0, "boundary mass")


def test_boundary_atoms_of_a_reflected_step(skorokhod_cfg):
    boundary = BoundaryMeasure(1, keep_atoms=True)
    breakdown = reflect(np.array([0.5]), np.array([-2.0]), np.eye(1), skorokhod_cfg)
    boundary.absorb_boundary(breakdown)
    assert len(boundary.atoms) == 3
    for face, point, _ in boundary.atoms:
        assert face == 0
        assert -1.5 <= point[0] <= 0.0
    assert sum(weight for _, _, weight in boundary.atoms) == pytest.approx(1.5)
    assert_close(boundary.face_masses(1.5), [1.0], 1e-15, "face mass")


def test_boundary_mass_additivity(tandem_R, skorokhod_cfg):
    boundary = BoundaryMeasure(2)
    first = reflect(np.array([0.0, 1.0]), np.array([-1.0, -1.0]), tandem_R, skorokhod_cfg)
    second = reflect(np.array([0.5, 0.0]), np.array([-2.0, 0.3]), tandem_R, skorokhod_cfg)
    boundary.register_sink("one", lambda i, x: 1.0)
    boundary.absorb_boundary(first)
    boundary.absorb_boundary(second)
    expected = first.face_push + second.face_push
    assert_close(boundary.mass.value, expected, 1e-14, "boundary mass")
    assert_close(boundary.integrate("one", 1.0), expected, 1e-14, "boundary sink")
    merged = boundary.merge(BoundaryMeasure.from_state(boundary.get_state(), boundary.sinks))
    assert_close(merged.mass.value, 2.0 * expected, 1e-14, "merged boundary mass")


def test_boundary_atoms_stay_near_the_face(tandem_spec):
    # tandem: |theta_i| <= lambda + sqrt(lambda)|U| and the push from face 0 is at most |theta_0|,
    # so a face atom sits at most three such scales away from its face
    measure, boundary = WeightedMeasure(2), BoundaryMeasure(2)
    state = ChainState.create(tandem_spec, StepSchedule(exponent=0.5), 13, 0)
    run(tandem_spec, NoiseModel(), SkorokhodConfig(), 20_000, ChainSinks(measure, boundary), state)
    assert boundary.steps_with_push > 100
    assert np.all(boundary.audit_ratio > 0.0)
    assert np.all(boundary.audit_ratio <= 3.0 + 1e-9), f"audit ratio {boundary.audit_ratio.tolist()}"


def test_boundary_audit_ratio_of_single_step(skorokhod_cfg):
    boundary = BoundaryMeasure(1)
    breakdown = reflect(np.array([0.5]), np.array([-2.0]), np.eye(1), skorokhod_cfg)
    boundary.absorb_boundary(breakdown, 0.25, 3.0)
    # the farthest atom is near z(1) = -1.5, the step scale is 0.25 + 0.5 * 3
    assert 0.0 < boundary.audit_ratio[0] <= 1.5 / 1.75
    merged = boundary.merge(BoundaryMeasure(1))
    assert merged.audit_ratio[0] == boundary.audit_ratio[0]
