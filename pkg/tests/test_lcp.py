import numpy as np
import pytest

from rbm_stationary.exceptions import DimensionMismatch, RayTermination
from rbm_stationary.lcp import LcpSolution, solve_lcp, verify_complementarity
from .asserts_test import assert_close
from .utils_test import brute_force_lcp, random_reflection_matrix


def test_no_push_for_nonnegative_theta():
    sol = solve_lcp(np.eye(2), np.array([1.0, 2.0]))
    assert_close(sol.u, [0.0, 0.0], 0.0)
    assert_close(sol.v, [1.0, 2.0], 0.0)
    assert sol.active_set == ()
    assert sol.pivots_used == 0


def test_componentwise_reflection():
    sol = solve_lcp(np.eye(2), np.array([-1.0, 2.0]))
    assert_close(sol.u, [1.0, 0.0], 1e-12)
    assert_close(sol.v, [0.0, 2.0], 1e-12)
    assert sol.active_set == (0,)


def test_tandem_both_faces(tandem_R):
    sol = solve_lcp(tandem_R, np.array([-1.0, -1.0]))
    assert_close(sol.u, [1.0, 2.0], 1e-12)
    assert_close(sol.v, [0.0, 0.0], 1e-12)
    assert sol.active_set == (0, 1)


def test_residuals_of_exact_solution(product_spec):
    theta = np.array([-0.3, 0.2, -0.7])
    sol = solve_lcp(product_spec.R, theta)
    assert verify_complementarity(product_spec.R, theta, sol).max_residual() <= 1e-10


def test_linear_residual_of_zero_solution():
    report = verify_complementarity(np.eye(1), np.array([-1.0]),
                                    LcpSolution(np.zeros(1), np.zeros(1), (), 0))
    assert report.linear_residual == 1.0
    assert report.complementarity_gap == 0.0


def test_gap_grows_linearly_with_perturbation():
    R, theta = np.eye(2), np.array([-1.0, 2.0])
    sol = solve_lcp(R, theta)
    gaps = []
    for eps in (1e-3, 2e-3, 4e-3):
        perturbed = LcpSolution(sol.u + eps, sol.v, sol.active_set, sol.pivots_used)
        gaps.append(verify_complementarity(R, theta, perturbed).complementarity_gap)
    assert_close(gaps, [2e-3, 4e-3, 8e-3], 1e-12, "complementarity gaps")


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_lcp(np.eye(2), np.ones(3))


def test_ray_termination_on_inadmissible_matrix():
    with pytest.raises(RayTermination):
        solve_lcp(np.array([[-1.0]]), np.array([-1.0]))


@pytest.mark.parametrize("m", [2, 3, 4, 6, 8])
def test_random_diagonally_dominant(m):
    rng = np.random.default_rng(100 + m)
    for _ in range(25):
        off = rng.uniform(-0.4, 0.4, size=(m, m)) / m
        np.fill_diagonal(off, 0.0)
        R = np.eye(m) + off
        theta = rng.normal(size=m)
        sol = solve_lcp(R, theta)
        assert verify_complementarity(R, theta, sol).max_residual() <= 1e-9
        if m <= 4:
            expected = brute_force_lcp(R, theta)
            assert expected is not None
            assert_close(sol.u, expected, 1e-9, "push vector")


def test_positive_homogeneity(product_spec):
    rng = np.random.default_rng(5)
    for _ in range(100):
        theta = rng.normal(size=3)
        scale = rng.uniform(0.01, 100.0)
        sol = solve_lcp(product_spec.R, theta)
        scaled = solve_lcp(product_spec.R, scale * theta)
        assert_close(scaled.u, scale * sol.u, 1e-10 * scale * (1.0 + np.max(np.abs(sol.u))), "scaled push")
        assert scaled.active_set == sol.active_set


@pytest.mark.slow
def test_random_admissible_instances():
    rng = np.random.default_rng(2718)
    for _ in range(10_000):
        m = int(rng.integers(1, 9))
        R = random_reflection_matrix(rng, m)
        theta = rng.normal(size=m)
        sol = solve_lcp(R, theta)
        assert verify_complementarity(R, theta, sol).max_residual() <= 1e-10 * (1.0 + np.max(np.abs(theta)))
        if m <= 4:
            expected = brute_force_lcp(R, theta)
            assert_close(sol.u, expected, 1e-8, "push vector")
