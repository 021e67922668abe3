import numpy as np
import pytest

from cfa_storage.forecast import ForecastCurve
from cfa_storage.model import ModelParams, State
from cfa_storage.simulator import default_scenario


def make_state(params, t=0, r=5.0, wind=3.0, demand=4.0, price_market=2.0, price_grid=3.0, lookahead=None):
    """State with flat price and demand curves over ``[0, T]``."""
    T = params.horizon_T
    end = min(t + params.lookahead_H, T)
    if lookahead is None:
        lookahead = np.full(end - t, wind)
    values = np.concatenate([[wind], lookahead])
    ones = np.ones(T + 1)
    return State(
        t,
        r,
        ForecastCurve(t, values),
        price_market * ones,
        price_grid * ones,
        demand * ones,
    )


def random_state(rng, params, t=None):
    """State with random storage, forecasts, prices and demand."""
    T = params.horizon_T
    t = int(rng.integers(0, T + 1)) if t is None else t
    end = min(t + params.lookahead_H, T)
    return State(
        t,
        float(rng.uniform(0, params.r_max)),
        ForecastCurve(t, rng.uniform(0, 60, end - t + 1)),
        rng.uniform(5, 60, T + 1),
        rng.uniform(5, 60, T + 1),
        rng.uniform(0, 80, T + 1),
    )


@pytest.fixture
def small_params():
    return ModelParams(horizon_T=6, lookahead_H=3, r_max=10, gamma_c=5, gamma_d=5)


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
