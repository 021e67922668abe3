"""Physical and economic model of a wind-backed storage device.

Six energy flows are decided every period::

    wd  wind -> demand        wr  wind -> storage
    rd  storage -> demand     gr  grid -> storage
    gd  grid -> demand        rg  storage -> grid

Prices and demand are deterministic and kept as full vectors over ``[0, T]``
indexed by absolute period.  The only uncertainty is the wind forecast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .forecast import ForecastCurve

FLOWS = ("wd", "rd", "gd", "wr", "gr", "rg")
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Constants of the storage system.

    Attributes:
        horizon_T: Last period of the problem (periods run ``0..T``).
        lookahead_H: Number of periods the lookahead model plans beyond ``t``.
        r_max: Storage capacity (MWh).
        beta_c: Charge efficiency.
        beta_d: Discharge efficiency.
        gamma_c: Maximum energy charged per period.
        gamma_d: Maximum energy discharged per period.
        penalty_cp: Penalty per unit of unmet demand.
    """

    horizon_T: int = 72
    lookahead_H: int = 23
    r_max: float = 100.0
    beta_c: float = 0.9
    beta_d: float = 0.9
    gamma_c: float = 25.0
    gamma_d: float = 25.0
    penalty_cp: float = 200.0

    def __post_init__(self):
        if self.horizon_T < 0:
            raise ValueError("horizon_T must be nonnegative")
        if self.lookahead_H < 1:
            raise ValueError("lookahead_H must be at least 1")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        for name in ("beta_c", "beta_d"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        for name in ("gamma_c", "gamma_d", "penalty_cp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True, eq=False)
class State:
    """Information available to the manager at period ``t``.

    ``price_market``, ``price_grid`` and ``demand`` cover the whole problem
    ``[0, T]``; only the entries from ``t`` on are relevant.
    """

    t: int
    r: float
    forecast: ForecastCurve
    price_market: np.ndarray
    price_grid: np.ndarray
    demand: np.ndarray

    def __post_init__(self):
        if self.forecast.base_time != self.t:
            raise ValueError("forecast must be issued at the state's period")
        if self.r < -FEAS_TOL:
            raise ValueError(f"storage level must be nonnegative, got {self.r}")
        if np.any(np.asarray(self.demand) < 0):
            raise ValueError("demand must be nonnegative")

    @property
    def wind(self) -> float:
        """Wind energy available now."""
        return self.forecast.current


@dataclass(frozen=True)
class Decision:
    """Energy flows chosen at one period (MWh)."""

    wd: float = 0.0
    rd: float = 0.0
    gd: float = 0.0
    wr: float = 0.0
    gr: float = 0.0
    rg: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.wd, self.rd, self.gd, self.wr, self.gr, self.rg])

    @classmethod
    def from_array(cls, values) -> "Decision":
        return cls(*(float(v) for v in values))

    def __add__(self, other: "Decision") -> "Decision":
        return Decision.from_array(self.as_array() + other.as_array())

    def scaled(self, factor: float) -> "Decision":
        return Decision.from_array(factor * self.as_array())


@dataclass(frozen=True, eq=False)
class ExogenousInfo:
    """Forecast increments revealed between ``t`` and ``t+1``."""

    forecast_update: np.ndarray


class Violation(NamedTuple):
    constraint: str
    lhs: float
    rhs: float


def check_feasible(state: State, x: Decision, params: ModelParams) -> list[Violation]:
    """List the period-``t`` constraints violated by ``x`` (empty when feasible)."""
    checks = [
        ("demand", x.wd + params.beta_d * x.rd + x.gd, float(state.demand[state.t])),
        ("storage_available", x.rd + x.rg, state.r),
        ("wind_available", x.wr + x.wd, state.wind),
        ("headroom", params.beta_c * (x.wr + x.gr) - x.rd - x.rg, params.r_max - state.r),
        ("charge_rate", x.wr + x.gr, params.gamma_c),
        ("discharge_rate", x.rd + x.rg, params.gamma_d),
    ]
    violations = [Violation(name, lhs, rhs) for name, lhs, rhs in checks if lhs > rhs + FEAS_TOL]
    for name, value in zip(FLOWS, x.as_array()):
        if value < -FEAS_TOL:
            violations.append(Violation(f"nonnegative_{name}", -value, 0.0))
    return violations


def transition_storage(r: float, x: Decision, params: ModelParams) -> float:
    """Storage level at the next period."""
    return r - x.rd + params.beta_c * (x.wr + x.gr) - x.rg


def stage_cost(state: State, x: Decision, params: ModelParams) -> float:
    """Cost incurred at period ``t``; negative values are net revenue."""
    t = state.t
    served = x.wd + params.beta_d * x.rd + x.gd
    return (
        params.penalty_cp * state.demand[t]
        - (params.penalty_cp + state.price_market[t]) * served
        - state.price_grid[t] * (params.beta_d * x.rg - x.gr - x.gd)
    )


def cost_coefficients(params: ModelParams, price_market, price_grid) -> np.ndarray:
    """Per-flow coefficients of the stage cost, ordered as ``FLOWS``.

    The stage cost equals ``penalty_cp * demand + cost_coefficients @ x``.
    Prices may be arrays, in which case the result has shape ``(6, len)``.
    """
    serve = params.penalty_cp + np.asarray(price_market, dtype=float)
    price_grid = np.asarray(price_grid, dtype=float)
    return np.array(
        [
            -serve,
            -serve * params.beta_d,
            -serve + price_grid,
            np.zeros_like(serve),
            price_grid,
            -price_grid * params.beta_d,
        ]
    )
