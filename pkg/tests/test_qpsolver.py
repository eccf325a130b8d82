"""Tester för QP-lösaren"""
from typing import NamedTuple, Optional

import numpy as np
import pytest

from errors import ConfigError, InfeasibleError, IterationLimitError
from qpsolver import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, SolverSettings, run_benchmark, solve_qp


class Problem(NamedTuple):
    H: np.ndarray
    f: np.ndarray
    A_eq: Optional[np.ndarray]
    b_eq: Optional[np.ndarray]
    C: np.ndarray
    d: np.ndarray


def random_problem(rng: np.random.Generator, n: int = 8, p: int = 2, m: int = 12) -> Problem:
    """Konvext QP som är tillåtet genom konstruktion"""
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.1 * np.eye(n)
    f = rng.normal(size=n) * 5.0
    x_feasible = rng.normal(size=n)
    A = rng.normal(size=(p, n))
    C = rng.normal(size=(m, n))
    return Problem(H, f, A, A @ x_feasible, C, C @ x_feasible + rng.uniform(0.1, 1.0, m))


def test_unconstrained_minimum():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = np.array([1.0, -1.0])
    solution = solve_qp(H, f)
    assert solution.status == OPTIMAL
    np.testing.assert_allclose(solution.x, -np.linalg.solve(H, f), atol=1e-10)


def test_equality_constrained_minimum():
    H = np.eye(2)
    f = np.zeros(2)
    solution = solve_qp(H, f, A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([2.0]))
    assert solution.optimal
    np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-10)


def test_active_bound():
    # min (x − 2)² då x ≤ 1
    solution = solve_qp(np.array([[2.0]]), np.array([-4.0]), C=np.array([[1.0]]), d=np.array([1.0]))
    assert solution.optimal
    assert solution.x[0] == pytest.approx(1.0, abs=1e-7)
    assert solution.z[0] == pytest.approx(2.0, abs=1e-6)
    assert solution.objective == pytest.approx(-3.0, abs=1e-6)


def test_inactive_bound_has_zero_dual():
    solution = solve_qp(np.array([[2.0]]), np.array([-4.0]), C=np.array([[1.0]]), d=np.array([5.0]))
    assert solution.x[0] == pytest.approx(2.0, abs=1e-7)
    assert solution.z[0] == pytest.approx(0.0, abs=1e-6)


def test_paired_rows_become_equality_with_mapped_duals():
    # x0 ≤ 0 och −x0 ≤ 0 (dvs x0 = 0), min (x0 − 1)² + (x1 − 1)²
    H = 2.0 * np.eye(2)
    f = np.array([-2.0, -2.0])
    C = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    d = np.array([0.0, 0.0, 3.0])
    solution = solve_qp(H, f, C=C, d=d)
    assert solution.optimal
    np.testing.assert_allclose(solution.x, [0.0, 1.0], atol=1e-7)
    assert solution.z[0] == pytest.approx(2.0, abs=1e-6)
    assert solution.z[1] == pytest.approx(0.0, abs=1e-9)
    assert solution.z.shape == (3,)


def test_contradicting_pair_is_infeasible():
    C = np.array([[1.0], [-1.0]])
    d = np.array([-1.0, -1.0])
    solution = solve_qp(np.eye(1), np.zeros(1), C=C, d=d)
    assert solution.status == INFEASIBLE
    with pytest.raises(InfeasibleError) as info:
        solution.raise_for_status(["upper", "lower"])
    assert info.value.label in ("upper", "lower")


def test_zero_row_with_negative_bound_is_infeasible():
    C = np.array([[0.0, 0.0], [1.0, 0.0]])
    d = np.array([-0.5, 1.0])
    solution = solve_qp(np.eye(2), np.zeros(2), C=C, d=d)
    assert solution.status == INFEASIBLE
    assert solution.row == 0


def test_zero_row_with_positive_bound_is_ignored():
    C = np.array([[0.0, 0.0], [1.0, 0.0]])
    d = np.array([0.5, -1.0])
    solution = solve_qp(np.eye(2), np.zeros(2), C=C, d=d)
    assert solution.optimal
    assert solution.x[0] == pytest.approx(-1.0, abs=1e-7)


def test_infeasible_polytope_detected():
    # x0 + x1 ≤ −1 med x0, x1 ≥ 0
    C = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    d = np.array([-1.0, 0.0, 0.0])
    solution = solve_qp(np.eye(2), np.zeros(2), C=C, d=d)
    assert solution.status == INFEASIBLE
    assert solution.row is not None
    with pytest.raises(InfeasibleError):
        solution.raise_for_status()


def test_iteration_limit_reports_residuals():
    C = np.eye(2)
    d = np.array([5.0, 5.0])
    solution = solve_qp(np.eye(2), np.array([-1.0, -1.0]), C=C, d=d, settings=SolverSettings(max_iter=1))
    assert solution.status == ITERATION_LIMIT
    with pytest.raises(IterationLimitError) as info:
        solution.raise_for_status()
    assert set(info.value.residuals) == {"stationarity", "equality", "inequality", "complementarity"}
    assert info.value.solution is not None


def test_kkt_conditions_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(50):
        problem = random_problem(rng)
        solution = solve_qp(*problem)
        assert solution.optimal
        x, y, z = solution.x, solution.y, solution.z
        stationarity = problem.H @ x + problem.f + problem.A_eq.T @ y + problem.C.T @ z
        slack = problem.d - problem.C @ x
        assert np.abs(stationarity).max() <= 1e-7
        assert np.abs(problem.A_eq @ x - problem.b_eq).max() <= 1e-7
        assert slack.min() >= -1e-7
        assert z.min() >= 0.0
        assert np.abs(z * slack).max() <= 1e-6


def test_residuals_are_absolute_for_large_linear_terms():
    # min ½xᵀHx + fᵀx med obegränsat minimum (300, 100, 50) och x0 ≤ 250
    H = 2e3 * np.eye(3)
    f = -H @ np.array([300.0, 100.0, 50.0])
    solution = solve_qp(H, f, C=np.array([[1.0, 0.0, 0.0]]), d=np.array([250.0]))
    assert solution.optimal
    np.testing.assert_allclose(solution.x, [250.0, 100.0, 50.0], atol=1e-7)
    assert solution.z[0] == pytest.approx(1e5, rel=1e-8)
    assert solution.residuals["stationarity"] <= 1e-8 + 1e-12 * (1.0 + 6e5)


def test_warm_start_reaches_same_solution():
    rng = np.random.default_rng(7)
    problem = random_problem(rng)
    cold = solve_qp(*problem)
    warm = solve_qp(*problem, x_init=cold.x + 0.01)
    assert warm.optimal
    np.testing.assert_allclose(warm.x, cold.x, atol=1e-6)


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"max_iter": 0}, {"reg": -1.0}, {"step_fraction": 1.0}])
def test_invalid_settings_rejected(kwargs):
    with pytest.raises(ConfigError):
        SolverSettings(**kwargs)


def test_benchmark_collects_samples():
    rng = np.random.default_rng(3)
    problems = [random_problem(rng) for _ in range(3)]
    result = run_benchmark(problems, repetitions=2)
    assert len(result.samples) == 6
    assert result.failures == 0
    assert 0.0 < result.mean <= max(result.samples)
    assert result.p95 <= max(result.samples)
