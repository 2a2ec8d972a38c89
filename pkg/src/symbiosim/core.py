"""Domain types and the closed-form pricing, reward, and scarcity formulas.

Everything downstream (auction clearing, seller learning, metrics) is built
on the three scalar formulas defined here:

* delivered unit price:  ``phi * p_m + d * c_t``
* seller step profit:    ``sum(q * (p - c)) - unsold * c_d``
* scarcity ratio:        ``total demand / total supply``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Fixed sub-stream labels. Every random draw in a run flows from the master
# seed through one of these, so toggling instrumentation (contract logs,
# regret replay) can never shift a trajectory.
STREAM_LAYOUT = 0
STREAM_DEMAND = 1
STREAM_POLICY = 2


class ConfigError(ValueError):
    """Invalid parameter values or malformed configuration input."""


def substream(seed: int, *label: int) -> np.random.Generator:
    """Return a generator for the sub-stream ``label`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(label))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class MarketParams:
    """Exogenous scalars for one market scenario.

    ``c_d`` (disposal penalty), ``s`` (target scarcity ratio) and ``rho``
    (firm density, firms per km^2) have no sensible universal default and
    must always be supplied.  ``c_t`` is an absolute cost in currency per km
    per unit, not a fraction of ``p_m``.
    """

    c_d: float
    s: float
    rho: float
    p_m: float = 100.0
    c_t: float = 0.1
    cs: float = 1.0
    n_firms: int = 40
    n_clusters: int = 4
    buyer_fraction: float = 0.5
    beta_range: tuple[float, float] = (0.8, 1.2)
    demand_range: tuple[float, float] = (1.0, 10.0)
    K: int = 30
    alpha: float = 0.9
    tau_0: float = 0.5
    tau_min: float = 0.002
    decay: float = 0.996
    horizon: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.p_m > 0:
            raise ConfigError(f"p_m must be positive, got {self.p_m}")
        if self.c_t < 0:
            raise ConfigError(f"c_t must be nonnegative, got {self.c_t}")
        if self.c_d < 0:
            raise ConfigError(f"c_d must be nonnegative, got {self.c_d}")
        if not self.s > 0:
            raise ConfigError(f"s must be positive, got {self.s}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not 0.0 <= self.cs <= 1.0:
            raise ConfigError(f"cs must lie in [0, 1], got {self.cs}")
        if self.n_firms < 2:
            raise ConfigError(f"n_firms must be at least 2, got {self.n_firms}")
        if self.n_clusters < 1:
            raise ConfigError(f"n_clusters must be at least 1, got {self.n_clusters}")
        if not 0.0 < self.buyer_fraction < 1.0:
            raise ConfigError(
                f"buyer_fraction must lie strictly in (0, 1), got {self.buyer_fraction}"
            )
        if self.n_buyers < 1 or self.n_sellers < 1:
            raise ConfigError(
                f"buyer_fraction {self.buyer_fraction} with {self.n_firms} firms "
                "leaves one side of the market empty"
            )
        lo, hi = self.beta_range
        if not (0 < lo <= hi):
            raise ConfigError(f"beta_range must satisfy 0 < lo <= hi, got {self.beta_range}")
        lo, hi = self.demand_range
        if not (0 < lo <= hi):
            raise ConfigError(f"demand_range must satisfy 0 < lo <= hi, got {self.demand_range}")
        if self.K < 2:
            raise ConfigError(f"K must be at least 2, got {self.K}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.tau_0 >= self.tau_min > 0):
            raise ConfigError(
                f"temperature schedule needs tau_0 >= tau_min > 0, got "
                f"tau_0={self.tau_0}, tau_min={self.tau_min}"
            )
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError(f"decay must lie in (0, 1], got {self.decay}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.horizon}")
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def n_buyers(self) -> int:
        return int(math.floor(self.buyer_fraction * self.n_firms))

    @property
    def n_sellers(self) -> int:
        return self.n_firms - self.n_buyers

    @property
    def width(self) -> float:
        """Environment side length in km, fixed by density: sqrt(n_firms / rho)."""
        return math.sqrt(self.n_firms / self.rho)


@dataclass(frozen=True)
class Buyer:
    id: int
    position: tuple[float, float]
    q_need: float = 0.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.q_need < 0:
            raise ConfigError(f"buyer {self.id}: q_need must be nonnegative")
        if not self.beta > 0:
            raise ConfigError(f"buyer {self.id}: beta must be positive")


@dataclass(frozen=True)
class Seller:
    id: int
    position: tuple[float, float]
    q_supply: float = 0.0
    phi_index: int = 0

    def __post_init__(self) -> None:
        if self.q_supply < 0:
            raise ConfigError(f"seller {self.id}: q_supply must be nonnegative")


@dataclass(frozen=True)
class FirmLayout:
    """Positions and endowments of all firms plus the buyer-seller distances.

    ``dist[i, j]`` is the Euclidean distance in km between buyer ``i`` and
    seller ``j``.  Instances are immutable and safe to share across workers.
    """

    buyers: tuple[Buyer, ...]
    sellers: tuple[Seller, ...]
    dist: np.ndarray
    width: float

    def __post_init__(self) -> None:
        self.dist.setflags(write=False)

    def demand_vector(self) -> np.ndarray:
        return np.array([b.q_need for b in self.buyers], dtype=np.float64)

    def supply_vector(self) -> np.ndarray:
        return np.array([s.q_supply for s in self.sellers], dtype=np.float64)

    def beta_vector(self) -> np.ndarray:
        return np.array([b.beta for b in self.buyers], dtype=np.float64)

    def buyer_positions(self) -> np.ndarray:
        return np.array([b.position for b in self.buyers], dtype=np.float64)

    def seller_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sellers], dtype=np.float64)


@dataclass(frozen=True)
class Contract:
    """One executed trade within a timestep."""

    buyer_id: int
    seller_id: int
    qty: float
    unit_price: float
    round: int


def price_of(phi: float, p_m: float, d_ij: float, c_t: float) -> float:
    """Delivered unit price a seller quotes: ``phi * p_m + d_ij * c_t``.

    Negative prices are legitimate: a seller facing a disposal penalty may
    pay a buyer to take the byproduct.
    """
    return phi * p_m + d_ij * c_t


def seller_reward(
    qtys: Sequence[float],
    prices: Sequence[float],
    transport_costs: Sequence[float],
    unsold: float,
    c_d: float,
) -> float:
    """Step profit for one seller: contract margins minus the disposal bill.

    Accumulates ``qty * (price - transport)`` in the order given; callers
    that need bit-reproducible totals must pass contracts in execution
    order.
    """
    if not (len(qtys) == len(prices) == len(transport_costs)):
        raise ValueError(
            f"qtys/prices/transport_costs length mismatch: "
            f"{len(qtys)}/{len(prices)}/{len(transport_costs)}"
        )
    total = 0.0
    for q, p, c in zip(qtys, prices, transport_costs):
        total += q * (p - c)
    return total - unsold * c_d


def scarcity(buyers: Sequence[Buyer], sellers: Sequence[Seller]) -> float:
    """Total demand over total supply."""
    supply = math.fsum(s.q_supply for s in sellers)
    if supply <= 0:
        raise ZeroDivisionError("scarcity undefined: total seller supply is zero")
    demand = math.fsum(b.q_need for b in buyers)
    return demand / supply
