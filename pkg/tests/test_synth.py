import hashlib
import warnings

import numpy as np
import pytest

from needsbased import io
from needsbased.empirical import N_PATTERNS, PATTERNS, alternative_solution, transform_random
from needsbased.errors import DomainError
from needsbased.synth import (ecommerce_preset, generate_population, generate_scenario, grocery_preset,
                              simulate_patterns, summary_stats, travel_time_steps)


@pytest.fixture(scope="module")
def grocery200():
    scen, pop = grocery_preset(10, 0)
    res = simulate_patterns(generate_population(200, scen, 0), scen, pop, 0)
    return scen, pop, res


def test_scenario_frozen():
    scen = generate_scenario(10, 0)
    assert scen.attractiveness[:3] == pytest.approx([63.30946305937239, 155.17016507205284, 106.18230926514123])
    assert scen.travel_time[0, :3] == pytest.approx([0.7844500339570102, 0.4520651757555733, 0.9430768283255769])
    assert scen.size_measure_names == ("RE", "Area")
    assert np.array_equal(generate_scenario(10, 0).travel_time, scen.travel_time)


def test_travel_time_steps():
    raw, sym, final = travel_time_steps(np.random.default_rng(0), 6)
    assert np.all((raw >= 5 / 60) & (raw <= 1.0))
    assert np.array_equal(sym, sym.T)
    assert np.array_equal(np.triu(sym), np.triu(raw))
    ratio = final / sym
    assert np.all((ratio >= 0.9) & (ratio <= 1.1))


def test_population_deterministic():
    scen = generate_scenario(5, 1)
    a = generate_population(50, scen, 4)
    b = generate_population(50, scen, 4)
    for f in ("home", "ft_wd", "ft_we"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert np.all((a.ft_wd > 0) & (a.ft_wd < 8) & (a.ft_we > 0) & (a.ft_we < 16))
    with pytest.raises(DomainError):
        generate_scenario(0)


def test_grocery_frozen(grocery200):
    scen, _, res = grocery200
    s = summary_stats(res.observations, scen)
    assert len(res.observations) == 200
    assert s["mean_weekly_participation"] == pytest.approx(1.225)
    assert s["mean_one_way_tt_min"] == pytest.approx(22.363173363083643, rel=1e-12)
    assert s["participation_by_day"] == [42, 34, 27, 33, 20, 31, 58]
    digest = hashlib.sha256(io.observations_to_csv(res.observations).encode()).hexdigest()
    assert digest == "d23c97c3ecd80c9dd9247948e69a16b2f464cd68b8c15b597a92b8308a31e7dc"


def test_observed_week_matches_choice(grocery200):
    _, _, res = grocery200
    obs = res.observations
    pat = PATTERNS[res.chosen % N_PATTERNS]
    # the observed week repeats the chosen weekly pattern at the chosen zone
    assert np.array_equal(obs.delta, pat)
    assert np.array_equal(obs.alternatives(), res.chosen)


def test_chunking_does_not_matter(grocery200):
    scen, pop, res = grocery200
    other = simulate_patterns(generate_population(200, scen, 0), scen, pop, 0, chunk=37)
    assert io.observations_to_csv(other.observations) == io.observations_to_csv(res.observations)


def test_noise_free_durations_are_optima():
    scen, pop = grocery_preset(4, 2)
    pop = pop.with_values(sigma_dur=0.0)
    persons = generate_population(25, scen, 2)
    res = simulate_patterns(persons, scen, pop, 2)
    obs = res.observations
    J = scen.n_zones
    for i in range(len(obs)):
        o = obs[i]
        rng = np.random.default_rng([2, o.person_id, 0x51])
        z = rng.standard_normal(3 + J)
        zeta = np.asarray(pop.mu_D) + np.sqrt(pop.omega_D) * z[:3]
        sol = alternative_solution(o.alternative, o, zeta, pop.xi, scen)
        weeks = sol.pattern.d.reshape(-1, 7)
        assert any(np.allclose(o.d, w, rtol=1e-9, atol=1e-12) for w in weeks)


def test_ecommerce_preset():
    scen, pop = ecommerce_preset()
    assert scen.n_zones == 1
    assert scen.travel_time[0, 0] == 0 and scen.travel_cost[0, 0] == 0
    assert pop.xi.gamma == 1.4 and pop.xi.mu == 0.1 and not pop.xi.use_size
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = simulate_patterns(generate_population(300, scen, 0), scen, pop, 0)
    s = summary_stats(res.observations, scen)
    assert s["mean_one_way_tt_min"] == 0.0
    assert int(np.argmax(s["participation_by_day"])) == 0


def test_summary_histograms(grocery200):
    scen, _, res = grocery200
    s = summary_stats(res.observations, scen)
    assert sum(s["duration_hist"]["counts"]) == int(res.observations.delta.sum())
    assert sum(s["tt_hist"]["counts"]) == int(res.observations.delta.sum())
    assert len(s["duration_hist"]["edges_hr"]) == len(s["duration_hist"]["counts"]) + 1
    io.validate(dict(s, preset="grocery", seed=0, n_requested=200, excluded=[]), "synth_summary")
