import numpy as np
import pytest

from needsbased import ModelParams, Linear, ScenarioInputs


def base_inputs(H=7, n_locations=1, **over):
    kw = dict(attractiveness=100.0, travel_time_two_way=1.0, travel_cost_two_way=10.0,
              free_time_weekday=2.0, free_time_weekend=6.0)
    kw.update(over)
    return ScenarioInputs.uniform(H, n_locations=n_locations, **kw)


def base_params(**over):
    kw = dict(gamma=1.2, rho1=30.0, rho3=15.0, production=Linear(0.0, 0.5, 0.4))
    kw.update(over)
    return ModelParams(**kw)


@pytest.fixture
def inputs():
    return base_inputs()


@pytest.fixture
def params():
    return base_params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
