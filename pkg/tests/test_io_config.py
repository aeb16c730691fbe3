import json

import numpy as np
import pytest

from needsbased import ConfigError, Linear, CobbDouglas
from needsbased import config, io
from needsbased.empirical import Observations
from needsbased.synth import generate_scenario

from conftest import base_inputs


def test_scenario_inputs_roundtrip():
    inp = base_inputs(n_locations=2)
    back = io.scenario_inputs_from_dict(io.scenario_inputs_to_dict(inp))
    for f in ("attractiveness", "travel_time", "travel_cost", "free_time"):
        assert np.array_equal(getattr(back, f), getattr(inp, f))


def test_zone_scenario_roundtrip():
    scen = generate_scenario(4, 1)
    back = io.zone_scenario_from_dict(json.loads(io.dumps(scen.to_dict())))
    assert np.array_equal(back.travel_time, scen.travel_time)
    assert np.array_equal(back.size_measures, scen.size_measures)
    assert back.size_measure_names == scen.size_measure_names


def test_observations_csv_roundtrip():
    obs = Observations([3, 7], [0, 1], [2.5, 1.0 / 3.0], [6.0, 5.5],
                       [[0, 0, 1, 0, 0, 0, 1], [1, 0, 0, 0, 0, 0, 0]],
                       [[0, 0, 0.1 + 0.2, 0, 0, 0, 2.0], [1e-7, 0, 0, 0, 0, 0, 0]],
                       [[-1, -1, 2, -1, -1, -1, 2], [0, -1, -1, -1, -1, -1, -1]])
    text = io.observations_to_csv(obs)
    back = io.observations_from_csv(text)
    assert io.observations_to_csv(back) == text
    assert np.array_equal(back.d, obs.d)
    assert np.array_equal(back.ft_wd, obs.ft_wd)
    assert np.array_equal(back.loc, obs.loc)


def test_observations_csv_errors():
    with pytest.raises(ConfigError):
        io.observations_from_csv("person_id,home\n1,2\n")
    with pytest.raises(ConfigError):
        io.observations_from_csv("")


def test_schema_rejects_bad_doc():
    with pytest.raises(ConfigError):
        io.validate({"mode": "full"}, "solve_result")
    with pytest.raises(ConfigError):
        io.scenario_inputs_from_dict({"locations": []})


def test_dumps_is_stable():
    assert io.dumps({"b": 1, "a": np.float64(0.1)}) == '{\n  "a": 0.1,\n  "b": 1\n}\n'


def test_model_config(tmp_path):
    p = tmp_path / "m.toml"
    p.write_text("""
[model]
gamma = 1.2
rho1 = 30.0
rho3 = 15.0
production = { type = "linear", q0 = 0.0, p1 = 0.5, q2 = 0.4 }

[scenario]
attractiveness = 100.0
travel_time_one_way_hr = 0.5
travel_cost_one_way = 5.0
free_time_weekday_hr = 2.0
free_time_weekend_hr = 6.0
""")
    cfg = config.load_config(p)
    mp = config.model_params(cfg)
    assert mp.rho2 == 30.0 and mp.production == Linear(0.0, 0.5, 0.4)
    inp = config.scenario_inputs(cfg)
    # one-way values are doubled
    assert inp.travel_time[0, 0] == 1.0 and inp.travel_cost[0, 0] == 10.0
    assert inp.free_time.tolist() == [2, 2, 2, 2, 2, 6, 6]


@pytest.mark.parametrize("text", [
    "[model\n",                                      # malformed TOML
    "[bogus]\nx = 1\n",                              # unknown section
    "[model]\ngamma = 1.2\nrho1 = 30\nrho3 = 15\nproduction = { type = 'linear', q0 = 0, p1 = 0.5, q2 = 0.4 }\n"
    "rho2 = 10\n",                                   # rho2 <= rho3
    "[model]\ngamma = 'x'\nrho1 = 30\nrho3 = 15\nproduction = { type = 'linear', q0 = 0, p1 = 0.5, q2 = 0.4 }\n",
    "[model]\ngamma = 1.2\nrho1 = 30\nrho3 = 15\nproduction = { type = 'cubic' }\n",
    "[model]\ngamma = 1.2\nrho1 = 30\nrho3 = 15\nproduction = { type = 'linear', q0 = 0, p1 = 0.5, q2 = 0.4 }\n"
    "typo = 3\n",                                    # unknown key
])
def test_bad_model_config(tmp_path, text):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        config.model_params(config.load_config(p))


def test_population_config():
    cfg = config.parse_config({"population": {"p1": 0.7, "q2": 0.45, "mu": 0.3, "beta_Area": 2.0,
                                              "omega_q0": 0.5}})
    pop = config.population_params(cfg)
    assert pop.get("p1") == 0.7 and pop.get("q2") == 0.45 and pop.get("mu") == 0.3
    assert pop.get("beta_RE") == 0.5 and pop.get("beta_Area") == 2.0 and pop.get("omega_q0") == 0.5
    cfg = config.parse_config({"population": {"q1": 0.5}})
    assert isinstance(config.population_params(cfg).xi.production(0.0), CobbDouglas)
    with pytest.raises(ConfigError):
        config.population_params(config.parse_config({"population": {"mu": -1.0}}))


def test_estimation_defaults():
    e = config.estimation_options(config.parse_config({}))
    assert e["draws"] == 200 and e["free"] == ["p1", "q2"] and e["budget"] == 40
    with pytest.raises(ConfigError):
        config.estimation_options(config.parse_config({"estimation": {"draws": 0}}))
    with pytest.raises(ConfigError):
        config.synth_options(config.parse_config({"synth": {"preset": "mall"}}))
