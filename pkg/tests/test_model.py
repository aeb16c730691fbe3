import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from needsbased import (ActivityPattern, CobbDouglas, DomainError, Horizon, InventoryTrajectory, Linear,
                        ModelParams, Piecewise, check_feasibility, consumption_vector, evaluate_objective,
                        production, reconstruct_trajectory)

from conftest import base_inputs, base_params


def test_cobb_douglas_value():
    # exp(-0.2) * 100**0.4 at d = 1
    assert production(CobbDouglas(-0.2, 0.5, 0.4), 1.0, 100.0) == pytest.approx(5.165841818063523, rel=1e-12)


def test_non_participation_is_zero():
    for spec in (CobbDouglas(0.1, 0.5, 0.4), Linear(0, 0.5, 0.4), Piecewise(0, 0.4, (2, 0.5), (1.0,))):
        assert production(spec, 0.0, 50.0, participate=False) == 0.0


def test_piecewise_value():
    pw = Piecewise(-0.2, 0.4, (2, 0.5, 0.25), (0.3, 2))
    C = math.exp(-0.2) * 100 ** 0.4
    assert production(pw, 1.0, 100.0) == pytest.approx(C * 0.95, rel=1e-12)
    # last segment is unbounded
    assert production(pw, 3.0, 100.0) == pytest.approx(C * (0.6 + 0.5 * 1.7 + 0.25 * 1.0), rel=1e-12)


def test_linear_value():
    assert production(Linear(0.1, 0.5, 0.4), 2.0, 100.0) == pytest.approx(math.exp(0.1) * 100 ** 0.4, rel=1e-12)


@pytest.mark.parametrize("d,A", [(-0.1, 100.0), (1.0, 0.0), (1.0, -3.0)])
def test_production_domain(d, A):
    with pytest.raises(DomainError):
        production(Linear(0, 0.5, 0.4), d, A)


def test_spec_validation():
    with pytest.raises(DomainError):
        CobbDouglas(0, 1.2, 0.4)
    with pytest.raises(DomainError):
        Piecewise(0, 0.4, (0.5, 2.0), (1.0,))          # increasing slopes
    with pytest.raises(DomainError):
        Piecewise(0, 0.4, (2.0, 1.0, 0.5), (1.0,))     # breakpoint count


def test_consumption_vector():
    p = base_params()
    assert consumption_vector(Horizon(7), p).tolist() == [1, 1, 1, 1, 1, 1.2, 1.2]
    assert np.all(consumption_vector(Horizon(7), base_params(gamma=1.0)) == 1.0)
    lam = consumption_vector(Horizon(14), base_params(gamma=1.4))
    assert np.array_equal(lam[:7], lam[7:])
    assert lam[5] == pytest.approx(1.4)


def test_rho2_must_exceed_rho3():
    with pytest.raises(DomainError):
        base_params(rho2=15.0)
    with pytest.raises(DomainError):
        base_params(rho2=10.0)
    assert base_params().rho2 == 30.0


def test_horizon():
    assert Horizon(14).weekend_days == frozenset({6, 7, 13, 14})
    with pytest.raises(DomainError):
        Horizon(0)
    with pytest.raises(DomainError):
        Horizon(7, frozenset({8}))


def test_evaluate_objective_hand_computed():
    inp = base_inputs()
    p = base_params()
    delta = np.array([0, 0, 0, 0, 0, 0, 1])
    C = 100 ** 0.4
    d = np.zeros(7)
    d[6] = 7.4 / (C * 0.5)
    pat = ActivityPattern(delta, d, np.zeros(7, int))
    lam = consumption_vector(Horizon(7), p)
    Q = np.where(delta == 1, C * 0.5 * d, 0.0)
    traj = reconstruct_trajectory(Q, lam)
    expect = 15 / 7 * np.sum(traj.I + Q - lam / 2) - (30 / 7 * (d[6] + 1.0) + 0 + 10 / 7)
    assert evaluate_objective(pat, traj, inp, p) == pytest.approx(expect, rel=1e-12)
    assert traj.I_min == 0.0


def test_evaluate_objective_dimension_mismatch():
    pat = ActivityPattern(np.zeros(7, int), np.zeros(7), np.zeros(7, int))
    with pytest.raises(DomainError):
        evaluate_objective(pat, InventoryTrajectory(np.zeros(6), np.zeros(6)), base_inputs(), base_params())


def test_pattern_validation():
    with pytest.raises(DomainError):
        ActivityPattern([0, 2, 0], [0, 1, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        ActivityPattern([0, 0, 0], [0, 1, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        ActivityPattern([0, 1, 0], [0, -1, 0], [0, 0, 0])


def test_feasibility_no_participation():
    pat = ActivityPattern(np.zeros(7, int), np.zeros(7), np.zeros(7, int))
    rep = check_feasibility(pat, base_inputs(), base_params())
    assert not rep.ok
    assert rep.days("replenish")


def test_feasibility_four_day_shape():
    # activity on days 2, 3, 5, 6 with enough production in total
    inp = base_inputs(free_time_weekday=4.0)
    p = base_params(gamma=1.0)
    delta = np.array([0, 1, 1, 0, 1, 1, 0])
    C = 100 ** 0.4 * 0.5
    # each activity covers its own day plus the idle days before the next one (cyclic)
    Q = np.array([0, 1, 2, 0, 1, 3, 0], float)
    d = Q / C
    rep = check_feasibility(ActivityPattern(delta, d, np.zeros(7, int)), inp, p)
    assert rep.ok, rep.violations


def test_feasibility_daily_time_flags_one_day():
    inp = base_inputs()
    p = base_params()
    delta = np.array([0, 0, 1, 0, 0, 1, 1])
    d = np.array([0, 0, 0.0, 0, 0, 0, 0])
    d[2] = 2.0 - 1.0 + 1e-3                     # FT - TT + eps on day 3
    d[5] = 2.0
    d[6] = 2.0
    rep = check_feasibility(ActivityPattern(delta, d, np.zeros(7, int)), inp, p)
    assert rep.days("daily_time") == [3]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=7, max_size=7), st.floats(0.6, 1.4))
def test_reconstructed_trajectory_conserves(q, gamma):
    lam = consumption_vector(Horizon(7), base_params(gamma=gamma))
    Q = np.asarray(q)
    traj = reconstruct_trajectory(Q, lam)
    assert traj.I.min() == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(np.diff(traj.I), (Q - lam)[:-1], atol=1e-12)
