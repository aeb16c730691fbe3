import numpy as np
import pytest

from needsbased import (CobbDouglas, ConditionedProblem, Horizon, InfeasibleError, Linear, ScenarioInputs,
                        oracle_full_tiny, oracle_gradient, oracle_grid, solve_conditioned)
from needsbased.oracle import OracleScaleError, grid_error_bound, project_polytope

from conftest import base_inputs, base_params


def tiny_problem(delta, **over):
    h = Horizon(3, frozenset())
    inp = ScenarioInputs.uniform(3, attractiveness=100.0, travel_time_two_way=1.0, travel_cost_two_way=10.0,
                                 free_time_weekday=2.5, free_time_weekend=2.5, horizon=h)
    return ConditionedProblem(np.asarray(delta), np.zeros(3, int), inp, base_params(**over), h)


@pytest.mark.parametrize("delta", [[1, 0, 1], [1, 1, 1], [0, 1, 1]])
def test_grid_within_bound_tiny(delta):
    prob = tiny_problem(delta)
    res = solve_conditioned(prob)
    g = oracle_grid(prob, step=1e-2)
    assert g.objective <= res.objective + 1e-9
    assert res.objective - g.objective <= grid_error_bound(prob, 1e-2)


def test_grid_infeasible_agrees():
    h = Horizon(3, frozenset())
    inp = ScenarioInputs.uniform(3, attractiveness=100.0, travel_time_two_way=1.0, travel_cost_two_way=10.0,
                                 free_time_weekday=1.5, free_time_weekend=1.5, horizon=h)
    prob = ConditionedProblem(np.array([1, 0, 0]), np.zeros(3, int), inp, base_params(), h)
    with pytest.raises(InfeasibleError):
        solve_conditioned(prob)
    with pytest.raises(InfeasibleError):
        oracle_grid(prob)


def test_grid_refuses_large():
    prob = ConditionedProblem(np.ones(7, int), np.zeros(7, int), base_inputs(), base_params())
    with pytest.raises(OracleScaleError):
        oracle_grid(prob)


def test_three_way_agreement():
    prob = ConditionedProblem(np.array([0, 1, 0, 0, 1, 1, 0]), np.zeros(7, int), base_inputs(), base_params())
    a = solve_conditioned(prob).objective
    b = oracle_gradient(prob).objective
    c = oracle_grid(prob, step=1e-2).objective
    assert a == pytest.approx(b, rel=1e-6)
    assert 0 <= a - c <= grid_error_bound(prob, 1e-2)


def test_cobb_douglas_kkt():
    prob = ConditionedProblem(np.array([0, 0, 1, 0, 0, 1, 1]), np.zeros(7, int), base_inputs(),
                              base_params(production=CobbDouglas(0.0, 0.5, 0.4)))
    res, resid = oracle_gradient(prob, return_residual=True)
    assert resid < 1e-6
    assert res.trajectory.I_min == pytest.approx(0.0, abs=1e-9)


def test_gradient_balance_infeasible():
    prob = ConditionedProblem(np.array([1, 0, 0, 0, 0, 0, 0]), np.zeros(7, int),
                              base_inputs(free_time_weekday=1.05), base_params())
    with pytest.raises(InfeasibleError):
        oracle_gradient(prob)


def test_full_tiny_single_active_day():
    # no travel: one day at the top of the slope order carries the whole cycle
    h = Horizon(3, frozenset())
    inp = ScenarioInputs.uniform(3, attractiveness=100.0, travel_time_two_way=0.0, travel_cost_two_way=0.0,
                                 free_time_weekday=5.0, free_time_weekend=5.0, horizon=h)
    p = base_params()
    res = oracle_full_tiny(inp, p, h, step=1e-2)
    C = 100 ** 0.4 * 0.5
    d = 3.0 / C
    # closed form: activity on day 1, inventory 3, 2, 1 at the starts of days 1..3 with I_min = 0 at day 3
    V = 15 / 3 * (0 + 1 + 2 + 3 - 1.5) - 30 / 3 * d
    assert res.pattern.delta.sum() == 1
    assert res.objective == pytest.approx(V, abs=grid_error_bound(
        ConditionedProblem(res.pattern.delta, np.zeros(3, int), inp, p, h), 1e-2))


def test_full_tiny_all_infeasible():
    h = Horizon(3, frozenset())
    inp = ScenarioInputs.uniform(3, attractiveness=100.0, travel_time_two_way=3.0, travel_cost_two_way=1.0,
                                 free_time_weekday=2.0, free_time_weekend=2.0, horizon=h)
    with pytest.raises(InfeasibleError):
        oracle_full_tiny(inp, base_params(), h)


def test_full_tiny_refuses_scale():
    with pytest.raises(OracleScaleError):
        oracle_full_tiny(base_inputs(), base_params())


def test_projection_is_feasible():
    rng = np.random.default_rng(0)
    # prefix sums at least 1, 2, 3, 4 and every coordinate at most 2
    G = np.vstack([np.tril(np.ones((4, 4))), -np.eye(4)])
    h = np.concatenate([[1.0, 2.0, 3.0, 4.0], -np.full(4, 2.0)])
    for _ in range(20):
        y = rng.normal(size=4) * 3
        x = project_polytope(y, G, h)
        assert np.all(G @ x >= h - 1e-9)
        # projection is idempotent
        assert np.allclose(project_polytope(x, G, h), x, atol=1e-9)
    assert project_polytope(np.zeros(2), np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, 0.0])) is None
