"""Base-model simulation of a policy over sampled forecast paths.

A path is identified by an integer seed.  The seed fixes every forecast
increment of the path, so evaluating different policies with the same seeds
uses common random numbers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from os import PathLike
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .forecast import ForecastConfig, evolve, initial_forecast, load_curve, sample_noise_path
from .model import (
    FLOWS,
    Decision,
    ModelParams,
    State,
    check_feasible,
    stage_cost,
    transition_storage,
)
from .policies import PolicySpec, decide

STORAGE_TOL = 1e-7


class InfeasibleDecisionError(RuntimeError):
    """A policy returned a decision violating the period constraints."""


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to simulate the base model from time zero."""

    params: ModelParams
    forecast: ForecastConfig
    price_market: np.ndarray
    price_grid: np.ndarray
    demand: np.ndarray
    r0: float

    def __post_init__(self):
        T = self.params.horizon_T
        for name in ("price_market", "price_grid", "demand"):
            values = np.asarray(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
            if values.shape != (T + 1,):
                raise ValueError(f"{name} must have T+1={T + 1} entries, got {values.shape}")
        if np.any(self.demand < 0):
            raise ValueError("demand must be nonnegative")
        if (self.forecast.horizon_T, self.forecast.horizon_H) != (T, self.params.lookahead_H):
            raise ValueError("forecast horizons do not match the model parameters")
        if not 0 <= self.r0 <= self.params.r_max:
            raise ValueError(f"r0 must lie in [0, r_max], got {self.r0}")

    @property
    def rho_e(self) -> float:
        return self.forecast.rho_e

    def with_rho(self, rho_e: float) -> "Scenario":
        return Scenario(
            self.params,
            self.forecast.with_rho(rho_e),
            self.price_market,
            self.price_grid,
            self.demand,
            self.r0,
        )

    def initial_state(self) -> State:
        return State(
            0,
            float(self.r0),
            initial_forecast(self.forecast),
            self.price_market,
            self.price_grid,
            self.demand,
        )

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "rho_e": self.rho_e,
            "r0": self.r0,
            "initial_wind": self.forecast.initial_curve.tolist(),
            "price_market": self.price_market.tolist(),
            "price_grid": self.price_grid.tolist(),
            "demand": self.demand.tolist(),
        }


def default_curves(horizon_T: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diurnal demand, price and initial wind forecast over ``[0, T]``."""
    t = np.arange(horizon_T + 1)
    demand = 50 + 20 * np.sin(2 * np.pi * t / 24)
    price = 30 + 15 * np.sin(2 * np.pi * (t - 6) / 24)
    wind = 25 + 10 * np.sin(2 * np.pi * t / 24 + 1)
    return demand, price, wind


DEFAULT_R0 = 50.0


def default_scenario(rho_e: float = 0.0, **param_overrides) -> Scenario:
    """Synthetic three-day hourly scenario with diurnal demand, prices and wind.

    ``param_overrides`` replace fields of :class:`ModelParams`; the curves
    follow the horizon.  The market price equals the grid price.
    """
    params = ModelParams(**param_overrides)
    demand, price, wind = default_curves(params.horizon_T)
    forecast = ForecastConfig(rho_e, wind, params.lookahead_H, params.horizon_T)
    r0 = min(DEFAULT_R0, params.r_max)
    return Scenario(params, forecast, price, price.copy(), demand, r0)


def scenario_from_dict(data: dict, base_dir: str | PathLike = ".") -> Scenario:
    """Build a scenario from a JSON-compatible mapping.

    Curves missing from ``data`` come from the synthetic default scenario;
    ``initial_wind_file`` may point to a one-column text file.
    """
    known = set(ModelParams.__dataclass_fields__)
    overrides = data.get("params", {})
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown model parameters: {sorted(unknown)}")
    params = ModelParams(**overrides)
    demand, price, wind = default_curves(params.horizon_T)
    if "initial_wind_file" in data:
        wind = load_curve(Path(base_dir) / data["initial_wind_file"])
    elif "initial_wind" in data:
        wind = np.asarray(data["initial_wind"], dtype=float)
    forecast = ForecastConfig(
        float(data.get("rho_e", 0.0)), wind, params.lookahead_H, params.horizon_T
    )
    return Scenario(
        params,
        forecast,
        np.asarray(data.get("price_market", price), dtype=float),
        np.asarray(data.get("price_grid", price), dtype=float),
        np.asarray(data.get("demand", demand), dtype=float),
        float(data.get("r0", min(DEFAULT_R0, params.r_max))),
    )


def load_scenario(path: str | PathLike) -> Scenario:
    path = Path(path)
    data = json.loads(path.read_text())
    return scenario_from_dict(data.get("scenario", data), base_dir=path.parent)


class PeriodRecord(NamedTuple):
    t: int
    r: float
    wind: float
    decision: Decision
    cost: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    records: tuple[PeriodRecord, ...]
    total_cost: float
    noise_digest: str = field(default="")

    @property
    def storage(self) -> np.ndarray:
        return np.array([rec.r for rec in self.records])

    @property
    def costs(self) -> np.ndarray:
        return np.array([rec.cost for rec in self.records])

    def to_csv(self, path: str | PathLike | None = None) -> str:
        """Write one row per period; returns the CSV text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "R", "wind", *FLOWS, "stage_cost"])
        for rec in self.records:
            writer.writerow(
                [rec.t, repr(rec.r), repr(rec.wind)]
                + [repr(float(v)) for v in rec.decision.as_array()]
                + [repr(rec.cost)]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def noise_digest(noise: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for z in noise:
        h.update(np.ascontiguousarray(z, dtype=np.float64).tobytes())
    return h.hexdigest()


def rollout(spec: PolicySpec, scenario: Scenario, seed: int) -> Trajectory:
    """Simulate ``spec`` over the forecast path identified by ``seed``."""
    params = scenario.params
    spec.check(params)
    noise = sample_noise_path(scenario.forecast, seed)
    state = scenario.initial_state()
    records = []
    total = 0.0
    for t in range(params.horizon_T + 1):
        x, _ = decide(spec, state, params)
        violations = check_feasible(state, x, params)
        if violations:
            raise InfeasibleDecisionError(f"t={t}: {violations}")
        cost = float(stage_cost(state, x, params))
        total += cost
        records.append(PeriodRecord(t, state.r, state.wind, x, cost))
        if t == params.horizon_T:
            break
        r = transition_storage(state.r, x, params)
        if not -STORAGE_TOL <= r <= params.r_max + STORAGE_TOL:
            raise InfeasibleDecisionError(f"t={t}: storage would move to {r}")
        state = State(
            t + 1,
            min(max(r, 0.0), params.r_max),
            evolve(state.forecast, scenario.forecast, noise[t]),
            scenario.price_market,
            scenario.price_grid,
            scenario.demand,
        )
    return Trajectory(tuple(records), total, noise_digest(noise))


def _total_cost(spec: PolicySpec, scenario: Scenario, seed: int) -> float:
    return rollout(spec, scenario, seed).total_cost


def path_costs(
    spec: PolicySpec, scenario: Scenario, seeds: Sequence[int], workers: int = 1
) -> np.ndarray:
    """Total cost of ``spec`` on each path, in the order of ``seeds``."""
    seeds = [int(s) for s in seeds]
    if scenario.rho_e == 0 and seeds:
        # Without forecast noise every path is the same.
        return np.full(len(seeds), _total_cost(spec, scenario, seeds[0]))
    run = partial(_total_cost, spec, scenario)
    if workers <= 1 or len(seeds) < 2:
        return np.array([run(s) for s in seeds])
    chunk = max(1, len(seeds) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(run, seeds, chunksize=chunk)))


class Estimate(NamedTuple):
    mean: float
    stderr: float
    costs: np.ndarray


def summarize(costs: np.ndarray) -> Estimate:
    costs = np.asarray(costs, dtype=float)
    if np.all(costs == costs[0]):
        return Estimate(float(costs[0]), 0.0, costs)
    stderr = float(costs.std(ddof=1) / math.sqrt(costs.size))
    return Estimate(float(costs.mean()), stderr, costs)


def estimate_objective(
    spec: PolicySpec, scenario: Scenario, n_paths: int, seed_base: int, workers: int = 1
) -> Estimate:
    """Mean total cost over paths ``seed_base .. seed_base + n_paths - 1``."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    seeds = range(seed_base, seed_base + n_paths)
    return summarize(path_costs(spec, scenario, seeds, workers))


def improvement(policy_mean: float, benchmark_mean: float) -> float:
    """Relative cost change against the benchmark; negative is better."""
    if benchmark_mean == 0:
        raise ValueError("benchmark mean must be nonzero")
    return (policy_mean - benchmark_mean) / abs(benchmark_mean)
