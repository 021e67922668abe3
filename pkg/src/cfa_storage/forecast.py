"""Rolling wind forecasts evolved by the martingale model of forecast evolution.

At every period the forecast of each future period inside the lookahead
window receives a zero-mean Gaussian increment whose standard deviation is
proportional to the current forecast value::

    f[t+1, t'] = max(0, f[t, t'] + rho_e * f[t, t'] * z[t+1, t'])

Periods that enter the window for the first time start from the value of the
initial curve.  Noise is supplied by the caller so that several policies can be
simulated on exactly the same forecast path.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np


@dataclass(frozen=True, eq=False)
class ForecastConfig:
    """Noise level and initial forecast of the wind process.

    Attributes:
        rho_e: Relative noise level of every forecast update.
        initial_curve: Forecast ``f[0, t']`` for every ``t'`` in ``[0, T]``.
        horizon_H: Number of lookahead periods covered by a forecast.
        horizon_T: Last period of the problem.
    """

    rho_e: float
    initial_curve: np.ndarray
    horizon_H: int
    horizon_T: int

    def __post_init__(self):
        curve = np.asarray(self.initial_curve, dtype=float)
        object.__setattr__(self, "initial_curve", curve)
        if self.rho_e < 0:
            raise ValueError(f"rho_e must be nonnegative, got {self.rho_e}")
        if self.horizon_H < 1:
            raise ValueError("horizon_H must be at least 1")
        if self.horizon_T < 0:
            raise ValueError("horizon_T must be nonnegative")
        if curve.ndim != 1 or curve.size != self.horizon_T + 1:
            raise ValueError(
                f"initial_curve must have T+1={self.horizon_T + 1} entries, got {curve.shape}"
            )
        if np.any(curve < 0) or not np.all(np.isfinite(curve)):
            raise ValueError("initial_curve values must be finite and nonnegative")

    def window_end(self, t: int) -> int:
        """Last period covered by the forecast issued at ``t``."""
        return min(t + self.horizon_H, self.horizon_T)

    def noise_length(self, t: int) -> int:
        """Number of increments needed to move the forecast from ``t`` to ``t+1``."""
        return self.window_end(t + 1) - t

    def with_rho(self, rho_e: float) -> "ForecastConfig":
        return ForecastConfig(rho_e, self.initial_curve, self.horizon_H, self.horizon_T)


@dataclass(frozen=True, eq=False)
class ForecastCurve:
    """Forecast issued at ``base_time`` for periods ``base_time .. window end``.

    ``values[0]`` is the wind energy currently available.
    """

    base_time: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("forecast curve must be a nonempty vector")
        if np.any(values < 0):
            raise ValueError("forecast values must be nonnegative")

    @property
    def current(self) -> float:
        return float(self.values[0])

    @property
    def lookahead(self) -> np.ndarray:
        """Forecasts for ``base_time + 1 .. window end``."""
        return self.values[1:]


def initial_forecast(config: ForecastConfig) -> ForecastCurve:
    """Forecast curve at time zero, read off the initial curve."""
    return ForecastCurve(0, config.initial_curve[: config.window_end(0) + 1].copy())


def raw_update(curve: ForecastCurve, config: ForecastConfig, noise: np.ndarray) -> np.ndarray:
    """Forecast values for the window of ``t + 1`` before truncation at zero."""
    t = curve.base_time
    if t >= config.horizon_T:
        raise ValueError(f"cannot evolve a forecast issued at the last period {t}")
    expected = config.noise_length(t)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (expected,):
        raise ValueError(f"noise must have length {expected} at t={t}, got {noise.shape}")
    if curve.values.size != config.window_end(t) - t + 1:
        raise ValueError("forecast curve does not cover the window of its base time")

    previous = curve.values[1:]
    if previous.size < expected:
        # The period t+1+H is revealed now and starts from its initial value.
        previous = np.append(previous, config.initial_curve[config.window_end(t + 1)])
    return previous + config.rho_e * previous * noise


def evolve(curve: ForecastCurve, config: ForecastConfig, noise: np.ndarray) -> ForecastCurve:
    """Advance a forecast curve by one period.

    Args:
        curve: Forecast issued at period ``t``.
        config: Noise level and horizons.
        noise: Standard normal draws, one per period of the new window.

    Returns:
        The forecast issued at ``t + 1``, truncated at zero.
    """
    return ForecastCurve(curve.base_time + 1, np.maximum(raw_update(curve, config, noise), 0.0))


def sample_noise_path(config: ForecastConfig, seed: int) -> list[np.ndarray]:
    """Standard normal increments for every transition ``t -> t+1``, ``t < T``.

    The draws depend only on the seed and the horizons, not on ``rho_e``, so
    paths with the same seed coincide across noise levels and policies.
    """
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(config.noise_length(t)) for t in range(config.horizon_T)]


def load_curve(path: str | PathLike) -> np.ndarray:
    """Read a one-column numeric text file (one value per period)."""
    values = np.loadtxt(path, dtype=float, ndmin=1)
    if values.ndim != 1:
        raise ValueError(f"{path}: expected a single column of values")
    return values
