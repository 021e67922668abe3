"""Zeroth-order stochastic search by Gaussian smoothing.

The objective is only available through noisy evaluations ``F(theta, seed)``,
where ``seed`` names a sample path.  The two-point estimator::

    G = (F(theta + eta * v, seed) - F(theta, seed)) / eta * v,   v ~ N(0, I)

is unbiased for the gradient of the smoothed function
``F_eta(theta) = E_v[F(theta + eta * v)]``.  :func:`sang_run` combines these
estimates by exponential averaging::

    theta_y = theta[k-1] - beta_k * gbar[k-1]
    theta[k] = (1 - alpha_k) * theta[k-1] + alpha_k * theta_y
    gbar[k] = (1 - alpha_k) * gbar[k-1] + alpha_k * G(theta[k])

and returns the iterate at a random index drawn with probability proportional
to ``alpha_k * beta_k``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

Objective = Callable[[np.ndarray, int], float]
"""Evaluates the objective at ``theta`` on the sample path named by ``seed``."""

MapFn = Callable[..., Iterable]

STEPSIZE_RULES = ("corollary", "rmsprop")
RMS_FLOOR = 1e-12
SEED_LIMIT = 2**63


@dataclass(frozen=True)
class SangConfig:
    """Settings of a SANG run.

    Attributes:
        dim_d: Parameter dimension.
        iters_N: Number of iterations.
        delta: Scale of the step, smoothing and averaging schedules.
        lip_L0: Assumed Lipschitz constant of the sampled objective.
        alpha_scale_a: Multiplier on the averaging weight.
        batch_m: Paired evaluations per gradient estimate.
        stepsize_rule: ``"corollary"`` for the constant step
            ``delta / (L0**2 d)``, ``"rmsprop"`` for ``b / sqrt(gbar)``.
        rms_b: RMSProp numerator ``b``.
        rms_gamma: RMSProp averaging rate, in (0, 1).
        theta0: Starting point; zeros when omitted.
        seed: Seeds the directions, the sample paths and the output index.
        independent_paths: Evaluate the two points of a pair on different paths.
    """

    dim_d: int
    iters_N: int
    delta: float = 1.0
    lip_L0: float = 1.0
    alpha_scale_a: float = 1.0
    batch_m: int = 1
    stepsize_rule: str = "corollary"
    rms_b: float = 1.0
    rms_gamma: float = 0.1
    theta0: tuple[float, ...] | None = None
    seed: int = 0
    independent_paths: bool = False

    def __post_init__(self):
        if self.dim_d < 1:
            raise ValueError("dim_d must be at least 1")
        if self.iters_N < 1:
            raise ValueError("iters_N must be at least 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.lip_L0 > 0:
            raise ValueError("lip_L0 must be positive")
        if not self.alpha_scale_a > 0:
            raise ValueError("alpha_scale_a must be positive")
        if self.batch_m < 1:
            raise ValueError("batch_m must be at least 1")
        if self.stepsize_rule not in STEPSIZE_RULES:
            raise ValueError(f"stepsize_rule must be one of {STEPSIZE_RULES}")
        if self.stepsize_rule == "rmsprop":
            if not 0 < self.rms_gamma < 1:
                raise ValueError("rms_gamma must lie in (0, 1)")
            if not self.rms_b > 0:
                raise ValueError("rms_b must be positive")
        if self.theta0 is not None:
            theta0 = tuple(float(v) for v in np.asarray(self.theta0, dtype=float).ravel())
            if len(theta0) != self.dim_d:
                raise ValueError(f"theta0 has {len(theta0)} entries, expected {self.dim_d}")
            object.__setattr__(self, "theta0", theta0)

    def initial_theta(self) -> np.ndarray:
        if self.theta0 is None:
            return np.zeros(self.dim_d)
        return np.array(self.theta0, dtype=float)


class HistoryRow(NamedTuple):
    k: int
    evals_cumulative: int
    alpha: float
    beta: float
    eta: float
    gbar_norm_sq: float
    mean_cost: float


HISTORY_COLUMNS = HistoryRow._fields


@dataclass(frozen=True, eq=False)
class SangResult:
    """Outcome of :func:`sang_run`.

    Attributes:
        theta_R: Iterate at the sampled output index.
        R: Output index in ``1..N``.
        history: One row per iteration.
        thetas: Iterates ``theta[0..N]``, shape ``(N + 1, d)``.
        gbars: Averaged gradients ``gbar[0..N]``, shape ``(N + 1, d)``.
        evaluations: Total objective evaluations (two per pair).
    """

    theta_R: np.ndarray
    R: int
    history: tuple[HistoryRow, ...]
    thetas: np.ndarray
    gbars: np.ndarray
    evaluations: int = field(default=0)

    @property
    def gbar_R(self) -> np.ndarray:
        return self.gbars[self.R]

    def history_csv(self, path: str | PathLike | None = None) -> str:
        return history_csv(self.history, path)


def history_csv(history: Sequence[HistoryRow], path: str | PathLike | None = None) -> str:
    """Write the per-iteration history; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for row in history:
        writer.writerow([row.k, row.evals_cumulative] + [repr(float(v)) for v in row[2:]])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def schedule(config: SangConfig, k: int) -> tuple[float, float, float]:
    """Averaging weight, smoothing radius and step at iteration ``k``.

    The values do not depend on ``k``; ``alpha`` is clamped into (0, 1].
    """
    if not 1 <= k <= config.iters_N:
        raise ValueError(f"k must lie in 1..{config.iters_N}, got {k}")
    d, L0, delta = config.dim_d, config.lip_L0, config.delta
    alpha = config.alpha_scale_a / math.sqrt(delta * (d + 4) * config.iters_N)
    alpha = min(alpha, 1.0)
    eta = delta / (L0 * math.sqrt(d))
    beta = delta / (L0**2 * d)
    return alpha, eta, beta


def rmsprop_step(
    accumulator: float, grad_norm_sq: float, b: float, gamma: float
) -> tuple[float, float]:
    """One RMSProp update.

    Returns:
        ``(beta, new_accumulator)`` with
        ``new_accumulator = (1 - gamma) * accumulator + gamma * grad_norm_sq``
        and ``beta = b / sqrt(new_accumulator)``.
    """
    if accumulator < 0 or grad_norm_sq < 0:
        raise ValueError("accumulator and grad_norm_sq must be nonnegative")
    new = (1.0 - gamma) * accumulator + gamma * grad_norm_sq
    return b / math.sqrt(max(new, RMS_FLOOR)), new


def sample_output_index(alphas, betas, rng: np.random.Generator) -> int:
    """Draw ``R`` in ``1..N`` with probability proportional to ``alpha_k * beta_k``."""
    weights = np.asarray(alphas, dtype=float) * np.asarray(betas, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ValueError("need at least one weight")
    if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights alpha_k * beta_k must be positive and finite")
    return int(rng.choice(weights.size, p=weights / weights.sum())) + 1


class PairSample(NamedTuple):
    direction: np.ndarray
    base_value: float
    shifted_value: float


def _evaluate(args) -> float:
    objective, theta, seed = args
    return float(objective(theta, seed))


def gradient_samples(
    objective: Objective,
    theta: np.ndarray,
    eta: float,
    directions: np.ndarray,
    seeds: Sequence[int],
    shifted_seeds: Sequence[int] | None = None,
    map_fn: MapFn = map,
) -> list[PairSample]:
    """Evaluate the pairs ``F(theta, s)`` and ``F(theta + eta v, s)``.

    ``shifted_seeds`` defaults to ``seeds``, so each pair shares one path.
    The returned order follows ``directions`` whatever ``map_fn`` does.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    theta = np.asarray(theta, dtype=float)
    shifted_seeds = seeds if shifted_seeds is None else shifted_seeds
    jobs = [(objective, theta, int(s)) for s in seeds]
    jobs += [(objective, theta + eta * v, int(s)) for v, s in zip(directions, shifted_seeds)]
    values = list(map_fn(_evaluate, jobs))
    m = len(seeds)
    return [PairSample(directions[i], values[i], values[m + i]) for i in range(m)]


def combine(samples: Sequence[PairSample], eta: float) -> np.ndarray:
    """Average the two-point estimates of a batch in a fixed order."""
    total = np.zeros_like(samples[0].direction)
    for s in samples:
        total += (s.shifted_value - s.base_value) / eta * s.direction
    return total / len(samples)


def gradient_estimate(
    objective: Objective,
    theta,
    eta: float,
    m: int,
    rng: np.random.Generator,
    seeds: Sequence[int] | None = None,
) -> np.ndarray:
    """Mini-batch two-point estimate of the smoothed gradient at ``theta``.

    Args:
        objective: ``F(theta, seed)``.
        theta: Point of evaluation.
        eta: Smoothing radius.
        m: Number of pairs.
        rng: Source of the directions and, when ``seeds`` is omitted, of the
            path seeds.
        seeds: Path seed for each pair.
    """
    theta = np.asarray(theta, dtype=float)
    directions = rng.standard_normal((m, theta.size))
    if seeds is None:
        seeds = rng.integers(0, SEED_LIMIT, size=m)
    return combine(gradient_samples(objective, theta, eta, directions, seeds), eta)


def sang_run(
    config: SangConfig,
    objective: Objective,
    seed_for: Callable[[int, int], int] | None = None,
    map_fn: MapFn = map,
) -> SangResult:
    """Run SANG for ``config.iters_N`` iterations.

    Args:
        config: Run settings.
        objective: ``F(theta, seed)``.
        seed_for: Maps ``(k, i)`` to the path seed of pair ``i`` at iteration
            ``k``; by default seeds are drawn from the run's generator.
        map_fn: ``map``-like callable used for the evaluations of one batch.

    Returns:
        The result; its ``history`` rows report the mean objective over the
        base points of each batch, so no evaluations are spent on monitoring.
    """
    walk_seq, index_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(walk_seq)
    N, d, m = config.iters_N, config.dim_d, config.batch_m
    rms = config.stepsize_rule == "rmsprop"

    theta = config.initial_theta()
    gbar = np.zeros(d)
    thetas = np.empty((N + 1, d))
    gbars = np.empty((N + 1, d))
    thetas[0], gbars[0] = theta, gbar
    alphas = np.empty(N)
    betas = np.empty(N)
    history = []
    evaluations = 0
    accumulator = 0.0
    beta_next = 0.0

    for k in range(1, N + 1):
        alpha, eta, beta = schedule(config, k)
        if rms:
            beta = beta_next
        theta_y = theta - beta * gbar
        new_theta = (1.0 - alpha) * theta + alpha * theta_y
        expected = theta - alpha * beta * gbar
        if not np.allclose(new_theta, expected, rtol=1e-12, atol=1e-12 * (1 + np.abs(theta).max())):
            raise AssertionError(f"update identity violated at k={k}")
        theta = new_theta

        directions = rng.standard_normal((m, d))
        if seed_for is None:
            seeds = [int(s) for s in rng.integers(0, SEED_LIMIT, size=m)]
        else:
            seeds = [int(seed_for(k, i)) for i in range(m)]
        shifted = None
        if config.independent_paths:
            shifted = [int(s) for s in rng.integers(0, SEED_LIMIT, size=m)]
        samples = gradient_samples(objective, theta, eta, directions, seeds, shifted, map_fn)
        G = combine(samples, eta)
        evaluations += 2 * m
        gbar = (1.0 - alpha) * gbar + alpha * G

        if rms:
            # The step of iteration k needs gbar[k-1] before G(theta[k]) exists,
            # so it uses the accumulator through k-1.  The first accumulator is
            # |G^1|^2, which also defines beta_1 (irrelevant to the walk since
            # gbar[0] = 0, but it weights the output index).
            g2 = float(G @ G)
            if k == 1:
                accumulator = g2
            beta_next, accumulator = rmsprop_step(
                accumulator, g2, config.rms_b, config.rms_gamma
            )
            if k == 1:
                beta = beta_next
        thetas[k], gbars[k] = theta, gbar
        alphas[k - 1], betas[k - 1] = alpha, beta
        mean_cost = float(np.mean([s.base_value for s in samples]))
        history.append(HistoryRow(k, evaluations, alpha, beta, eta, float(gbar @ gbar), mean_cost))

    R = sample_output_index(alphas, betas, np.random.default_rng(index_seq))
    return SangResult(thetas[R].copy(), R, tuple(history), thetas, gbars, evaluations)


class SmoothedEstimate(NamedTuple):
    value: float
    value_stderr: float
    grad: np.ndarray
    grad_stderr: np.ndarray


def smoothed_reference(
    F: Callable[[np.ndarray], float],
    theta,
    eta: float,
    n_mc: int,
    rng: np.random.Generator | None = None,
    vectorized: bool = False,
) -> SmoothedEstimate:
    """Monte Carlo estimates of ``F_eta(theta)`` and its gradient.

    Args:
        F: Deterministic function of one parameter vector.  With
            ``vectorized=True`` it receives an ``(n, d)`` array instead and
            returns ``n`` values.
        theta: Point of evaluation.
        eta: Smoothing radius.
        n_mc: Number of Gaussian directions.
        rng: Source of the directions.
        vectorized: See ``F``.

    Returns:
        Means and standard errors of ``F(theta + eta v)`` and of the
        two-point estimate ``(F(theta + eta v) - F(theta)) / eta * v``.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    theta = np.asarray(theta, dtype=float)
    v = rng.standard_normal((n_mc, theta.size))
    points = theta + eta * v
    if vectorized:
        f0 = float(np.asarray(F(theta[None, :]))[0])
        values = np.asarray(F(points), dtype=float)
    else:
        f0 = float(F(theta))
        values = np.array([F(p) for p in points], dtype=float)
    grads = ((values - f0) / eta)[:, None] * v
    if n_mc == 1:
        return SmoothedEstimate(float(values[0]), 0.0, grads[0], np.zeros(theta.size))
    root = math.sqrt(n_mc)
    return SmoothedEstimate(
        float(values.mean()),
        float(values.std(ddof=1) / root),
        grads.mean(axis=0),
        grads.std(axis=0, ddof=1) / root,
    )


def estimate_lipschitz(
    objective: Objective,
    theta,
    n_pairs: int,
    radius: float,
    rng: np.random.Generator,
) -> float:
    """Largest observed slope ``|F(a, s) - F(b, s)| / |a - b|``.

    Pairs are drawn uniformly from the ball of ``radius`` around ``theta``
    and each pair shares one path.  The result is a lower estimate of the
    Lipschitz constant and a reasonable default for ``lip_L0``.
    """
    theta = np.asarray(theta, dtype=float)
    best = 0.0
    for _ in range(n_pairs):
        a, b = (theta + _ball_point(theta.size, radius, rng) for _ in range(2))
        seed = int(rng.integers(0, SEED_LIMIT))
        gap = float(np.linalg.norm(a - b))
        if gap > 0:
            best = max(best, abs(objective(a, seed) - objective(b, seed)) / gap)
    return best


def _ball_point(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d)
    return radius * rng.random() ** (1.0 / d) * v / np.linalg.norm(v)
