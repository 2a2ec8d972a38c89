"""Counterfactual per-step regret via deterministic auction replay.

For every seller and every grid arm, the timestep is re-cleared with that
seller's action swapped and everyone else frozen.  The replay uses the same
clearing kernel as the live run and no fresh randomness, so replaying the
action actually played reproduces the live reward bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .auction import clear_arrays, market_matrices
from .core import FirmLayout, MarketParams
from .learning import ActionGrid


@dataclass(frozen=True)
class RegretRecord:
    """Per-seller payoff gaps to the best single-arm deviation at one step."""

    t: int
    per_seller_regret: np.ndarray
    total_regret: float

    @property
    def mean_regret(self) -> float:
        return float(self.per_seller_regret.mean())


def counterfactual_payoffs(
    layout: FirmLayout,
    params: MarketParams,
    action_indices: Sequence[int] | np.ndarray,
    grid: ActionGrid,
) -> np.ndarray:
    """Payoff matrix ``(n_sellers, K)``: seller j's reward had it played arm k."""
    idx = np.asarray(action_indices, dtype=np.int64)
    n_s = len(layout.sellers)
    if idx.shape != (n_s,):
        raise ValueError(f"expected {n_s} action indices, got shape {idx.shape}")
    if idx.min() < 0 or idx.max() >= grid.K:
        raise ValueError("action index outside the grid")

    phis = grid.values[idx]
    prices, qual, transport = market_matrices(layout, params, phis)
    tol = layout.beta_vector() * params.p_m
    supply = layout.supply_vector()
    demand = layout.demand_vector()
    c_d = params.c_d

    payoffs = np.empty((n_s, grid.K), dtype=np.float64)
    scratch_p = prices.copy()
    scratch_q = qual.copy()
    for j in range(n_s):
        # Column j under every arm: arm price plus this column's transport.
        col_t = transport[:, j]
        cols = grid.values[None, :] * params.p_m + col_t[:, None]
        cols_ok = cols <= tol[:, None]
        for k in range(grid.K):
            scratch_p[:, j] = cols[:, k]
            scratch_q[:, j] = cols_ok[:, k]
            res = clear_arrays(scratch_p, scratch_q, supply, demand, transport)
            payoffs[j, k] = res.seller_revenue[j] - res.unsold[j] * c_d
        scratch_p[:, j] = prices[:, j]
        scratch_q[:, j] = qual[:, j]
    return payoffs


def counterfactual_regret(
    layout: FirmLayout,
    params: MarketParams,
    action_indices: Sequence[int] | np.ndarray,
    grid: ActionGrid,
    t: int = 0,
) -> RegretRecord:
    """Best-alternative reward minus replayed played-action reward, per seller.

    Both terms come from the same replay sweep, so identical tie-breaking
    applies to each and the gap is nonnegative by construction.
    """
    idx = np.asarray(action_indices, dtype=np.int64)
    payoffs = counterfactual_payoffs(layout, params, idx, grid)
    played = payoffs[np.arange(payoffs.shape[0]), idx]
    best = payoffs.max(axis=1)
    regret = best - played
    return RegretRecord(
        t=t, per_seller_regret=regret, total_regret=float(regret.sum())
    )


def rolling_median(series: Sequence[float] | np.ndarray, window: int) -> np.ndarray:
    """Trailing median; prefixes shorter than ``window`` use what exists."""
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = np.median(x[max(0, i - window + 1) : i + 1])
    return out
