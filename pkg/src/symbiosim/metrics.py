"""Symbiosis index and aggregate market statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Contract


def symbiosis_index(q_bought: float, q_toSell: float, q_needed: float) -> float:
    """Fraction of the feasible exchange realized.

    ``q_bought / min(q_toSell, q_needed)``, with the empty market treated
    as fully symbiotic (nothing to exchange, nothing wasted).
    """
    if q_bought < 0 or q_toSell < 0 or q_needed < 0:
        raise ValueError(
            f"quantities must be nonnegative, got ({q_bought}, {q_toSell}, {q_needed})"
        )
    feasible = min(q_toSell, q_needed)
    if feasible == 0:
        return 1.0
    return q_bought / feasible


def weighted_mean_price(contracts: Sequence[Contract]) -> float | None:
    """Quantity-weighted mean unit price; ``None`` when nothing traded."""
    if not contracts:
        return None
    total_value = sum(c.qty * c.unit_price for c in contracts)
    total_qty = sum(c.qty for c in contracts)
    return total_value / total_qty


@dataclass(frozen=True)
class MarketAggregates:
    """Per-timestep exchange totals."""

    q_bought: float
    q_toSell: float
    q_needed: float
    mean_price: float | None = None

    @property
    def si(self) -> float:
        return symbiosis_index(self.q_bought, self.q_toSell, self.q_needed)


def aggregate_step(
    qtys: np.ndarray, prices: np.ndarray, q_toSell: float, q_needed: float
) -> MarketAggregates:
    """Aggregates from contract arrays (hot-path variant)."""
    total_qty = float(np.sum(qtys))
    if total_qty > 0:
        mean_price = float(np.sum(qtys * prices)) / total_qty
    else:
        mean_price = None
    return MarketAggregates(
        q_bought=total_qty, q_toSell=q_toSell, q_needed=q_needed, mean_price=mean_price
    )
