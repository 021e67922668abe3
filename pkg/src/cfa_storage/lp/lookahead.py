"""Deterministic lookahead LP over the periods ``t .. min(t+H, T)``.

Variables are laid out block by block: six flows for every period of the
window (the first block is the decision actually implemented), followed by one
storage level per block, ``R[t+1] .. R[window end + 1]``.  Each block carries
six inequalities (demand, storage availability, wind, headroom, charge rate,
discharge rate) and one equality linking its storage level to the next.  A
final row bounds the terminal storage level.  No salvage value is attached to
the terminal storage, so plans near the end of the window tend to drain it.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..model import FLOWS, ModelParams, State, cost_coefficients
from .simplex import LinearProgram

ROWS_PER_BLOCK = 7
WD, RD, GD, WR, GR, RG = range(6)


def window_blocks(t: int, params: ModelParams) -> int:
    """Number of periods planned by the lookahead issued at ``t``."""
    return min(t + params.lookahead_H, params.horizon_T) - t + 1


@lru_cache(maxsize=512)
def _template(nb: int, params: ModelParams) -> tuple[np.ndarray, tuple[str, ...]]:
    # Constraint matrix and relations depend only on the window length.
    nf = 6 * nb
    m = ROWS_PER_BLOCK * nb + 1
    A = np.zeros((m, nf + nb))
    bc, bd = params.beta_c, params.beta_d
    blocks = np.arange(nb)
    col = 6 * blocks
    row = ROWS_PER_BLOCK * blocks
    storage = nf + blocks  # R[t+b+1]
    prev = storage[1:] - 1  # R[t+b] for b >= 1

    A[row, col + WD] = 1.0  # demand
    A[row, col + RD] = bd
    A[row, col + GD] = 1.0
    A[row + 1, col + RD] = 1.0  # storage availability
    A[row + 1, col + RG] = 1.0
    A[row[1:] + 1, prev] = -1.0
    A[row + 2, col + WR] = 1.0  # wind
    A[row + 2, col + WD] = 1.0
    A[row + 3, col + WR] = bc  # headroom
    A[row + 3, col + GR] = bc
    A[row + 3, col + RD] = -1.0
    A[row + 3, col + RG] = -1.0
    A[row[1:] + 3, prev] = 1.0
    A[row + 4, col + WR] = 1.0  # charge rate
    A[row + 4, col + GR] = 1.0
    A[row + 5, col + RD] = 1.0  # discharge rate
    A[row + 5, col + RG] = 1.0
    # R[t+b+1] = R[t+b] - rd - rg + bc (wr + gr)
    A[row + 6, storage] = 1.0
    A[row + 6, col + RD] = 1.0
    A[row + 6, col + RG] = 1.0
    A[row + 6, col + WR] = -bc
    A[row + 6, col + GR] = -bc
    A[row[1:] + 6, prev] = -1.0
    A[m - 1, storage[-1]] = 1.0  # terminal bound
    A.setflags(write=False)
    relations = (("<=",) * 6 + ("=",)) * nb + ("<=",)
    return A, relations


@lru_cache(maxsize=1024)
def variable_names(t: int, nb: int) -> tuple[str, ...]:
    periods = range(t, t + nb)
    names = tuple(f"{flow}[{p}]" for p in periods for flow in FLOWS)
    return names + tuple(f"R[{p + 1}]" for p in periods)


def build_lookahead(state: State, params: ModelParams, wind_rhs: np.ndarray) -> LinearProgram:
    """Assemble the lookahead LP at ``state``.

    Args:
        state: Current state; its available wind bounds the first block.
        params: Model constants.
        wind_rhs: Right-hand side of the wind constraint for every lookahead
            period ``t+1 .. min(t+H, T)``; must be nonnegative.

    Returns:
        The LP. Its ``offset`` holds the constant penalty term so that
        ``objective @ x + offset`` is the total planned cost.
    """
    t = state.t
    nb = window_blocks(t, params)
    wind_rhs = np.asarray(wind_rhs, dtype=float)
    if wind_rhs.shape != (nb - 1,):
        raise ValueError(f"wind_rhs must have {nb - 1} entries at t={t}, got {wind_rhs.shape}")
    if np.any(wind_rhs < 0):
        raise ValueError("wind_rhs entries must be nonnegative")

    A, relations = _template(nb, params)
    window = slice(t, t + nb)
    demand = np.asarray(state.demand[window], dtype=float)
    rhs = np.empty((nb, ROWS_PER_BLOCK))
    rhs[:, 0] = demand
    rhs[:, 1] = 0.0
    rhs[0, 1] = state.r
    rhs[0, 2] = state.wind
    rhs[1:, 2] = wind_rhs
    rhs[:, 3] = params.r_max
    rhs[0, 3] = params.r_max - state.r
    rhs[:, 4] = params.gamma_c
    rhs[:, 5] = params.gamma_d
    rhs[:, 6] = 0.0
    rhs[0, 6] = state.r
    rhs = np.append(rhs.ravel(), params.r_max)

    c = np.zeros(7 * nb)
    c[: 6 * nb] = cost_coefficients(
        params, state.price_market[window], state.price_grid[window]
    ).T.ravel()
    offset = float(params.penalty_cp * demand.sum())
    return LinearProgram(c, A, relations, rhs, offset=offset, names=variable_names(t, nb))
