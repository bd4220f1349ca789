import numpy as np
import pytest

from picrl import oracles
from picrl.mdp import TabularPolicy, exact_policy_evaluation, garnet

from conftest import one_state_mdp


def test_solve_matches_geometric_series():
    v = oracles.soft_values_by_solve(one_state_mdp([1.0]), TabularPolicy.uniform(1, 1))
    np.testing.assert_allclose(v, 10.0, atol=1e-12)


def test_solve_agrees_with_iteration():
    spec = garnet(4, 2, 2, seed=1)
    pol = TabularPolicy(np.random.default_rng(0).dirichlet(np.ones(2), size=4))
    vt = exact_policy_evaluation(spec, pol, alpha=0.3, tol=1e-13)
    np.testing.assert_allclose(oracles.soft_values_by_solve(spec, pol, 0.3), vt.v, atol=1e-10)


def test_soft_value_iteration_hard_max_limit():
    spec = one_state_mdp([1.0, 0.0], gamma=0.5)
    q, probs = oracles.soft_value_iteration(spec, 0.0)
    np.testing.assert_allclose(q, [[2.0, 1.0]], atol=1e-10)
    np.testing.assert_array_equal(probs, [[1.0, 0.0]])


def test_soft_value_iteration_closed_form():
    # one state, equal rewards: V = (r + alpha ln A) / (1 - gamma)
    spec = one_state_mdp([1.0, 1.0], gamma=0.5)
    q, probs = oracles.soft_value_iteration(spec, 0.2)
    v = (1.0 + 0.2 * np.log(2)) / 0.5
    np.testing.assert_allclose(q, 1.0 + 0.5 * v, atol=1e-10)
    np.testing.assert_allclose(probs, 0.5)


def test_monte_carlo_estimators_report_standard_errors():
    spec = one_state_mdp([0.5, 0.5], horizon=50)
    mean, se = oracles.monte_carlo_oscillation(spec, TabularPolicy.uniform(1, 2), 2000, np.random.default_rng(0))
    assert abs(mean - 0.5) < 4 * se and se > 0
    mean, se = oracles.monte_carlo_return(spec, TabularPolicy.uniform(1, 2), 100, np.random.default_rng(0))
    assert mean == pytest.approx(0.5 * (1 - 0.9 ** 51) / 0.1, abs=1e-12) and se < 1e-12


def test_finite_differences_restore_parameters():
    p = [np.array([1.0, 2.0])]
    g = oracles.finite_difference_grads(lambda: float(np.sum(p[0] ** 2)), p, 1e-5)
    np.testing.assert_allclose(g[0], [2.0, 4.0], atol=1e-8)
    np.testing.assert_array_equal(p[0], [1.0, 2.0])


def test_relative_error_is_scale_free():
    a, n = [np.array([1.0, 0.0])], [np.array([1.0, 1e-6])]
    e = oracles.relative_error(a, n)
    assert e == pytest.approx(1e-6, rel=1e-3)
    assert oracles.relative_error([1e6 * a[0]], [1e6 * n[0]]) == pytest.approx(e)
    assert oracles.relative_error([np.zeros(2)], [np.zeros(2)]) == 0.0
