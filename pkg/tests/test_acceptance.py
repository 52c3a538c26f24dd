"""
Desk-scale runs against the closed-form benchmarks. Deselected by default,
run with `pytest -m slow`. Multi-chain runs use one worker per physical core.
"""
from concurrent.futures import ProcessPoolExecutor
import logging

import numpy as np
import pytest

from rbm_stationary.cltlab import TestFunction, clt_study, echeverria_residual, register_echeverria_sinks
from rbm_stationary.measure import BoundaryMeasure, WeightedMeasure
from rbm_stationary.models.config import RunConfig, SkorokhodConfig, TestFunctionSection
from rbm_stationary.models.discovery import HostInfo
from rbm_stationary.noise import NoiseModel
from rbm_stationary.reference import SYMMETRIC_TABLE, example_by_name, exponential_cdf
from rbm_stationary.scheme import ChainSinks, ChainState, StepSchedule, TRUNCATION_ALERT_RATE, run
from .asserts_test import assert_close, assert_unit_mass

pytestmark = pytest.mark.slow

logger = logging.getLogger(__name__)

WORKERS = HostInfo.discover().physical_cores

# smooth bump reaching across the face x_1 = 0, so both residual parts are nonzero
FACE_BUMP = ([0.3, 0.6], 0.5)


def _long_run(name, n_steps, seed=2024, exponent=0.5, **kwargs):
    example = example_by_name(name, **kwargs)
    spec = example.spec
    state = ChainState.create(spec, StepSchedule(exponent=exponent), seed, 0)
    measure = WeightedMeasure(spec.m)
    run(spec, NoiseModel(), SkorokhodConfig(), n_steps, ChainSinks(measure), state)
    return example, state, measure


def _run_config(tmp_path, spec, **fields):
    document = {
        "spec": spec,
        "seed": 2024,
        "threads": WORKERS,
        "checkpoint_every": 0,
        "output_dir": str(tmp_path / spec["name"]),
        "sinks": {"trace_points": 10},
    }
    document.update(fields)
    return RunConfig.parse_obj(document)


def _echeverria_at_two_horizons(seed):
    spec = example_by_name("tandem-2d").spec
    f = TestFunction.bump(*FACE_BUMP)
    measure, boundary = WeightedMeasure(spec.m), BoundaryMeasure(spec.m)
    register_echeverria_sinks(spec, f, measure, boundary)
    state = ChainState.create(spec, StepSchedule(exponent=0.3), seed, 0)
    sinks = ChainSinks(measure, boundary)
    run(spec, NoiseModel(), SkorokhodConfig(), 10 ** 4, sinks, state)
    early = echeverria_residual(measure, boundary, f).residual
    run(spec, NoiseModel(), SkorokhodConfig(), 10 ** 6 - 10 ** 4, sinks, state)
    late = echeverria_residual(measure, boundary, f).residual
    return abs(early), abs(late)


def test_tandem_mean_over_replications(run_manager, tmp_path):
    config = _run_config(tmp_path, {"name": "tandem-2d"}, n_steps=10 ** 6, replications=10)
    summary = run_manager.estimate(config)
    assert summary.mass == 1.0
    assert 0.45 <= summary.mean[0] <= 0.55, f"E[x_1] estimate {summary.mean[0]}"
    assert summary.truncation_rate <= TRUNCATION_ALERT_RATE


def test_product_marginals():
    example, _, measure = _long_run("product-3d", 10 ** 6)
    for j, rate in enumerate(example.law.rates):
        stats = measure.marginal_stats(j, lambda x, rate=rate: exponential_cdf(rate, x))
        assert stats.ks <= 0.05
        assert measure.mean()[j] == pytest.approx(1.0 / rate, abs=0.08)


def test_product_rates_against_fixed_step_oracle(run_manager, tmp_path):
    # constant step 1e-3: the projection bias of the mean is about -0.58 sqrt(1e-3) = -0.018
    config = _run_config(tmp_path, {"name": "product-3d"}, n_steps=4 * 10 ** 6, replications=16,
                         schedule={"kind": "power", "c": 1e-3, "exponent": 0.0})
    summary = run_manager.estimate(config)
    law = example_by_name("product-3d").law
    derived = [1.0 / rate for rate in law.rates]
    published = [1.0 / rate for rate in law.published_rates]
    logger.info(f"Fixed-step means {summary.mean}, derived {derived}, published {published}")
    # the two rate sets put the means of coordinates 0 and 2 about 0.1 apart
    for j in (0, 2):
        assert abs(summary.mean[j] - derived[j]) < abs(summary.mean[j] - published[j]), \
            f"coordinate {j}: mean {summary.mean[j]}, derived {derived[j]}, published {published[j]}"
    assert_close(summary.mean, derived, 0.06, "fixed-step marginal means")


def test_symmetric_first_moment():
    example, _, measure = _long_run("symmetric-8d", 10 ** 6, r=0.1, rho=0.0)
    assert example.law.m1() == pytest.approx(dict(SYMMETRIC_TABLE)[0.0], abs=5e-4)
    assert abs(measure.mean()[0] - 0.182) <= 0.05
    assert np.all(measure.mean() > 0.0)


def test_symmetric_strong_correlation_completes():
    example, state, measure = _long_run("symmetric-8d", 10 ** 6, r=0.1, rho=0.9)
    assert state.k == 10 ** 6
    assert_unit_mass(measure)
    assert np.all(np.isfinite(measure.mean()))
    logger.info(f"rho=0.9: E[x_1] estimate {measure.mean()[0]:.4f}, reference {example.law.m1():.4f}")


def test_alpha_sweep_favours_square_root_steps(run_manager, tmp_path):
    config = _run_config(tmp_path, {"name": "tandem-2d"}, n_steps=10 ** 6, replications=10,
                         alphas=[0.1, 0.5, 0.9])
    document = run_manager.alpha_sweep(config)
    errors = {row["exponent"]: row["terminal_rms_error"] for row in document["sweep"]}
    logger.info(f"Terminal errors per chain: {errors}")
    assert errors[0.5] <= errors[0.1]
    assert errors[0.5] <= errors[0.9]


def test_clt_fast_regime():
    spec = example_by_name("tandem-2d").spec
    section = TestFunctionSection(kind="bump", center=[1.0, 1.0], radius=0.5)
    with ProcessPoolExecutor(max_workers=WORKERS) as executor:
        report = clt_study(spec, StepSchedule(exponent=0.7), section, replications=200, n_steps=10 ** 5,
                           seed=2024, executor_map=executor.map)
    summary = report.summary
    assert summary.regime == "fast"
    assert abs(summary.skewness) <= 0.5
    assert 0.5 <= summary.variance_ratio <= 2.0, f"variance ratio {summary.variance_ratio}"
    assert abs(summary.m_tilde) <= 0.02


def test_echeverria_residual_shrinks():
    with ProcessPoolExecutor(max_workers=WORKERS) as executor:
        pairs = list(executor.map(_echeverria_at_two_horizons, range(10)))
    logger.info(f"|r_n| at n=10^4 and n=10^6: {pairs}")
    assert sum(late < early for early, late in pairs) >= 8
