import warnings

import numpy as np
import pytest

from needsbased.empirical import SimulatedLikelihood, simulated_loglik
from needsbased.errors import ConfigError, DomainError
from needsbased.estimate import TRANSFORMS, loglik_surface, maximize, to_internal, to_natural
from needsbased.synth import generate_population, grocery_preset, simulate_patterns


@pytest.fixture(scope="module")
def sample():
    scen, pop = grocery_preset(2, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = simulate_patterns(generate_population(12, scen, 5), scen, pop, 5)
    return scen, pop, res.observations


@pytest.mark.parametrize("name", sorted(TRANSFORMS))
def test_transform_roundtrip(name):
    v = 0.37
    assert to_natural(name, to_internal(name, v)) == pytest.approx(v, rel=1e-14)


def test_transform_domain():
    with pytest.raises(DomainError):
        to_internal("p1", -0.1)
    with pytest.raises(DomainError):
        to_internal("q1", 1.5)


def test_empty_free_set(sample):
    scen, pop, obs = sample
    res = maximize(obs, pop, [], 10, 3, 0, scen)
    assert res.estimates == pop
    assert res.n_evals == 1
    assert res.trace == []
    assert res.loglik == pytest.approx(simulated_loglik(obs, pop, 3, 0, scen))


def test_budget_one(sample):
    scen, pop, obs = sample
    res = maximize(obs, pop.with_values(p1=0.7), ["p1", "q2"], 1, 3, 0, scen)
    assert len(res.trace) == 1
    assert set(res.trace[0]) == {"iteration", "p1", "q2", "loglik"}


def test_maximize_improves(sample):
    scen, pop, obs = sample
    start = pop.with_values(p1=0.65, q2=0.4)
    L = SimulatedLikelihood(obs, scen, 4, seed=1)
    res = maximize(obs, start, ["p1", "q2"], 15, 4, 1, scen, likelihood=L)
    assert len(res.trace) <= 15
    assert res.loglik >= L(start)
    assert [r["iteration"] for r in res.trace] == list(range(1, len(res.trace) + 1))
    lls = [r["loglik"] for r in res.trace]
    assert all(b >= a for a, b in zip(lls, lls[1:]))


def test_unknown_parameter(sample):
    scen, pop, obs = sample
    with pytest.raises(ConfigError):
        maximize(obs, pop, ["nope"], 5, 2, 0, scen)


def test_single_cell_surface(sample):
    scen, pop, obs = sample
    s = loglik_surface(obs, pop, ("p1", [0.8]), ("q2", [0.5]), 3, 2, scen)
    assert s.values.shape == (1, 1)
    assert s.values[0, 0] == simulated_loglik(obs, pop, 3, 2, scen)


def test_surface_deterministic(sample):
    scen, pop, obs = sample
    ax1, ax2 = ("p1", np.linspace(0.6, 1.0, 3)), ("q2", np.linspace(0.3, 0.7, 2))
    a = loglik_surface(obs, pop, ax1, ax2, 3, 4, scen)
    b = loglik_surface(obs, pop, ax1, ax2, 3, 4, scen)
    assert a.values.shape == (3, 2)
    assert np.array_equal(a.values, b.values)
    i, j = a.argmax
    assert a.values[i, j] == a.values.max()
    assert a.argmax_point == (a.grid1[i], a.grid2[j])
