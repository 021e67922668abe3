"""Parametric cost function approximation policies.

Every policy solves the deterministic lookahead LP; they differ only in the
right-hand side used for the wind constraint of the lookahead periods::

    benchmark   b = f
    const       b = theta * f
    lkup        b = theta[tau - 1] * f              tau = t' - t in 1..H
    exp         b = theta[0] * exp(theta[1] * tau) * f

``b`` is clamped at zero, so any real parameter vector yields a feasible LP.
The current period always uses the wind actually available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .forecast import ForecastCurve
from .lp import build_lookahead, solve
from .model import Decision, ModelParams, State

FAMILIES = ("benchmark", "const", "lkup", "exp")


class LookaheadError(RuntimeError):
    """The lookahead LP could not be solved; indicates a defect, not bad luck."""


@dataclass(frozen=True)
class PolicySpec:
    family: str
    theta: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown policy family {self.family!r}; expected one of {FAMILIES}")
        theta = tuple(float(v) for v in np.atleast_1d(np.asarray(self.theta, dtype=float)))
        object.__setattr__(self, "theta", theta)
        fixed = {"benchmark": 0, "const": 1, "exp": 2}
        if self.family in fixed and len(theta) != fixed[self.family]:
            raise ValueError(
                f"{self.family} policy takes {fixed[self.family]} parameters, got {len(theta)}"
            )
        if self.family == "lkup" and not theta:
            raise ValueError("lkup policy needs one parameter per lookahead period")

    @classmethod
    def benchmark(cls) -> "PolicySpec":
        return cls("benchmark")

    @classmethod
    def const(cls, theta: float) -> "PolicySpec":
        return cls("const", (theta,))

    @classmethod
    def lkup(cls, theta) -> "PolicySpec":
        return cls("lkup", tuple(theta))

    @classmethod
    def exp(cls, scale: float, rate: float) -> "PolicySpec":
        return cls("exp", (scale, rate))

    @property
    def dim(self) -> int:
        return len(self.theta)

    def with_theta(self, theta) -> "PolicySpec":
        return PolicySpec(self.family, tuple(np.asarray(theta, dtype=float).ravel()))

    def check(self, params: ModelParams) -> None:
        if self.family == "lkup" and self.dim != params.lookahead_H:
            raise ValueError(
                f"lkup policy needs {params.lookahead_H} parameters, got {self.dim}"
            )

    def to_dict(self) -> dict:
        return {"family": self.family, "theta": list(self.theta)}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicySpec":
        return cls(data["family"], tuple(data.get("theta", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PolicySpec":
        return cls.from_dict(json.loads(text))


def default_theta(family: str, params: ModelParams) -> np.ndarray:
    """Parameters under which every family reproduces the benchmark."""
    return {
        "benchmark": np.zeros(0),
        "const": np.ones(1),
        "lkup": np.ones(params.lookahead_H),
        "exp": np.array([1.0, 0.0]),
    }[family]


def wind_rhs(spec: PolicySpec, curve: ForecastCurve, params: ModelParams) -> np.ndarray:
    """Wind constraint right-hand sides for ``t+1 .. min(t+H, T)``."""
    spec.check(params)
    f = curve.lookahead
    tau = np.arange(1, f.size + 1)
    theta = np.asarray(spec.theta)
    if spec.family == "benchmark":
        b = f.copy()
    elif spec.family == "const":
        b = theta[0] * f
    elif spec.family == "lkup":
        b = theta[tau - 1] * f
    else:
        b = f * theta[0] * np.exp(theta[1] * tau)
    return np.maximum(b, 0.0)


def decide(spec: PolicySpec, state: State, params: ModelParams) -> tuple[Decision, float]:
    """Solve the parameterized lookahead at ``state`` and keep the first block.

    Returns:
        The decision for period ``t`` and the planned cost over the window.
    """
    lp = build_lookahead(state, params, wind_rhs(spec, state.forecast, params))
    solution = solve(lp)
    if not solution.optimal:
        raise LookaheadError(f"lookahead LP at t={state.t} returned {solution.status}")
    return Decision.from_array(solution.x[:6]), solution.objective_value + lp.offset
