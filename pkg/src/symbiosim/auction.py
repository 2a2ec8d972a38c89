"""Multi-round multilateral auction that clears one market timestep.

A timestep is cleared in rounds.  Each round: every seller with stock bids
its full remaining quantity to every buyer at its posted delivered price;
every unsatisfied buyer picks the single cheapest bid within its price
tolerance (ties to the lower seller id) and proposes the smaller of its
residual need and the offered quantity; every seller ranks the proposals it
received by per-unit margin, breaking ties by larger requested quantity and
then lower buyer id, and accepts greedily until its inventory runs out,
truncating the final acceptance if needed.  Satisfied buyers and empty
sellers drop out.  Rounds repeat until one clears nothing.

Because a seller quotes the same margin ``phi * p_m`` to every buyer, the
margin key is constant within a round and the quantity tie-break decides
the acceptance order in practice.

The round loop lives in ``_clear_loop``, a single function compiled with
numba when available (pure-Python fallback otherwise).  Every executed
contract either satisfies its buyer or empties its seller, so a timestep
can never execute more than ``n_buyers + n_sellers`` contracts and the
round count is capped at the same bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, IO, Sequence

import numpy as np

from .core import Contract, FirmLayout, MarketParams

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


@dataclass(frozen=True)
class Bid:
    """One seller-to-buyer offer: full remaining stock at the posted price."""

    seller_id: int
    buyer_id: int
    qty_available: float
    unit_price: float


@dataclass(frozen=True)
class Proposal:
    """A buyer's acceptance sent back to its chosen seller."""

    buyer_id: int
    seller_id: int
    qty_requested: float
    unit_price: float


class AuctionError(RuntimeError):
    """The round loop violated its own termination bound."""


def _clear_loop(prices, qual, supply, demand, transport):
    n_b, n_s = prices.shape
    need = demand.copy()
    inv = supply.copy()
    cap = n_b + n_s
    c_buyer = np.empty(cap, np.int64)
    c_seller = np.empty(cap, np.int64)
    c_qty = np.empty(cap, np.float64)
    c_price = np.empty(cap, np.float64)
    c_round = np.empty(cap, np.int64)
    revenue = np.zeros(n_s, np.float64)
    choice = np.empty(n_b, np.int64)
    prop_idx = np.empty(n_b, np.int64)
    prop_qty = np.empty(n_b, np.float64)
    n_c = 0
    rounds = 0
    status = 0
    while True:
        rounds += 1
        if rounds > cap:
            status = 1
            break
        n_props = 0
        for i in range(n_b):
            best = -1
            best_p = np.inf
            if need[i] > 0.0:
                for j in range(n_s):
                    if inv[j] > 0.0 and qual[i, j]:
                        p = prices[i, j]
                        if p < best_p:
                            best_p = p
                            best = j
            choice[i] = best
            if best >= 0:
                n_props += 1
        if n_props == 0:
            break
        made = False
        for j in range(n_s):
            if inv[j] <= 0.0:
                continue
            m = 0
            for i in range(n_b):
                if choice[i] == j and need[i] > 0.0:
                    q = need[i] if need[i] < inv[j] else inv[j]
                    prop_idx[m] = i
                    prop_qty[m] = q
                    m += 1
            if m == 0:
                continue
            # Stable insertion sort, quantity descending; equal quantities
            # keep their ascending-buyer-id gather order.
            for a in range(1, m):
                qa = prop_qty[a]
                ia = prop_idx[a]
                b = a - 1
                while b >= 0 and prop_qty[b] < qa:
                    prop_qty[b + 1] = prop_qty[b]
                    prop_idx[b + 1] = prop_idx[b]
                    b -= 1
                prop_qty[b + 1] = qa
                prop_idx[b + 1] = ia
            remaining = inv[j]
            for a in range(m):
                if remaining <= 0.0:
                    break
                i = prop_idx[a]
                q = prop_qty[a]
                if q > remaining:
                    q = remaining
                p = prices[i, j]
                c_buyer[n_c] = i
                c_seller[n_c] = j
                c_qty[n_c] = q
                c_price[n_c] = p
                c_round[n_c] = rounds
                n_c += 1
                revenue[j] += q * (p - transport[i, j])
                need[i] -= q
                remaining -= q
                made = True
            inv[j] = remaining
        if not made:
            break
    return (
        c_buyer[:n_c],
        c_seller[:n_c],
        c_qty[:n_c],
        c_price[:n_c],
        c_round[:n_c],
        inv,
        need,
        rounds,
        revenue,
        status,
    )


_clear_loop_py = _clear_loop
if njit is not None:
    _clear_loop = njit(cache=True)(_clear_loop)


class ClearingResult:
    """Contracts and residuals from clearing one timestep.

    Contract data is held as flat arrays in execution order; the
    ``contracts`` property materializes :class:`Contract` objects on demand.
    ``seller_revenue[j]`` is ``sum(qty * (price - transport))`` accumulated
    in execution order, the first term of seller ``j``'s step reward.
    """

    def __init__(
        self,
        buyer_ids: np.ndarray,
        seller_ids: np.ndarray,
        qtys: np.ndarray,
        prices: np.ndarray,
        round_ids: np.ndarray,
        unsold: np.ndarray,
        unmet: np.ndarray,
        rounds: int,
        seller_revenue: np.ndarray,
    ) -> None:
        self.contract_buyer = buyer_ids
        self.contract_seller = seller_ids
        self.contract_qty = qtys
        self.contract_price = prices
        self.contract_round = round_ids
        self.unsold = unsold
        self.unmet = unmet
        self.rounds = int(rounds)
        self.seller_revenue = seller_revenue

    @cached_property
    def contracts(self) -> tuple[Contract, ...]:
        return tuple(
            Contract(
                buyer_id=int(b),
                seller_id=int(s),
                qty=float(q),
                unit_price=float(p),
                round=int(r),
            )
            for b, s, q, p, r in zip(
                self.contract_buyer,
                self.contract_seller,
                self.contract_qty,
                self.contract_price,
                self.contract_round,
            )
        )

    @property
    def n_contracts(self) -> int:
        return int(self.contract_qty.shape[0])

    def total_traded(self) -> float:
        return float(np.sum(self.contract_qty))


def market_matrices(
    layout: FirmLayout, params: MarketParams, phis: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Delivered prices, tolerance mask, and per-unit transport costs."""
    transport = layout.dist * params.c_t
    prices = phis[None, :] * params.p_m + transport
    tol = layout.beta_vector() * params.p_m
    qual = prices <= tol[:, None]
    return prices, qual, transport


def clear_arrays(
    prices: np.ndarray,
    qual: np.ndarray,
    supply: np.ndarray,
    demand: np.ndarray,
    transport: np.ndarray,
) -> ClearingResult:
    """Clear a market described directly by matrices (hot path)."""
    out = _clear_loop(prices, qual, supply, demand, transport)
    if out[-1] != 0:
        raise AuctionError(
            f"round loop exceeded the {prices.shape[0] + prices.shape[1]}-round bound; "
            "residual quantities are not making progress"
        )
    return ClearingResult(*out[:-1])


def run_auction(
    layout: FirmLayout,
    params: MarketParams,
    actions: Sequence[float] | np.ndarray,
    trace: Callable[[dict], None] | IO[str] | None = None,
) -> ClearingResult:
    """Clear one timestep given each seller's price multiplier.

    ``actions[j]`` is seller ``j``'s multiplier on the reference price.
    With ``trace`` set (a callable or a writable text stream), one JSON
    record per round is emitted with the bids considered, the buyers'
    proposals, and the accepted contracts; the traced path is a pure-Python
    twin of the compiled loop and returns bit-identical results.
    """
    phis = np.asarray(actions, dtype=np.float64)
    if phis.shape != (len(layout.sellers),):
        raise ValueError(
            f"expected {len(layout.sellers)} actions, got shape {phis.shape}"
        )
    if not np.all(np.isfinite(phis)):
        raise ValueError("seller actions must be finite")
    prices, qual, transport = market_matrices(layout, params, phis)
    supply = layout.supply_vector()
    demand = layout.demand_vector()
    if trace is None:
        return clear_arrays(prices, qual, supply, demand, transport)
    sink = trace if callable(trace) else _json_line_sink(trace)
    out = _clear_traced(prices, qual, supply, demand, transport, sink)
    if out[-1] != 0:
        raise AuctionError("round loop exceeded its termination bound")
    return ClearingResult(*out[:-1])


def _json_line_sink(stream: IO[str]) -> Callable[[dict], None]:
    def write(record: dict) -> None:
        stream.write(json.dumps(record) + "\n")

    return write


def _clear_traced(prices, qual, supply, demand, transport, sink):
    """Instrumented twin of ``_clear_loop``; emits one record per round."""
    n_b, n_s = prices.shape
    need = demand.copy()
    inv = supply.copy()
    cap = n_b + n_s
    c_buyer, c_seller, c_qty, c_price, c_round = [], [], [], [], []
    revenue = np.zeros(n_s, np.float64)
    rounds = 0
    status = 0
    while True:
        rounds += 1
        if rounds > cap:
            status = 1
            break
        bids: list[Bid] = []
        for j in range(n_s):
            if inv[j] <= 0.0:
                continue
            for i in range(n_b):
                if need[i] > 0.0:
                    bids.append(Bid(j, i, float(inv[j]), float(prices[i, j])))
        proposals: list[Proposal] = []
        for i in range(n_b):
            if need[i] <= 0.0:
                continue
            best, best_p = -1, np.inf
            for j in range(n_s):
                if inv[j] > 0.0 and qual[i, j] and prices[i, j] < best_p:
                    best_p = prices[i, j]
                    best = j
            if best >= 0:
                q = need[i] if need[i] < inv[best] else inv[best]
                proposals.append(Proposal(i, best, float(q), float(best_p)))
        if not proposals:
            sink({"round": rounds, "bids": [vars(b) for b in bids], "proposals": [], "acceptances": []})
            break
        made = False
        acceptances = []
        for j in range(n_s):
            if inv[j] <= 0.0:
                continue
            mine = [p for p in proposals if p.seller_id == j]
            if not mine:
                continue
            mine.sort(key=lambda p: (-p.qty_requested, p.buyer_id))
            remaining = inv[j]
            for prop in mine:
                if remaining <= 0.0:
                    break
                q = prop.qty_requested
                if q > remaining:
                    q = remaining
                p = prices[prop.buyer_id, j]
                c_buyer.append(prop.buyer_id)
                c_seller.append(j)
                c_qty.append(q)
                c_price.append(p)
                c_round.append(rounds)
                acceptances.append(
                    {"buyer": prop.buyer_id, "seller": j, "qty": q, "unit_price": p, "round": rounds}
                )
                revenue[j] += q * (p - transport[prop.buyer_id, j])
                need[prop.buyer_id] -= q
                remaining -= q
                made = True
            inv[j] = remaining
        sink(
            {
                "round": rounds,
                "bids": [vars(b) for b in bids],
                "proposals": [vars(p) for p in proposals],
                "acceptances": acceptances,
            }
        )
        if not made:
            break
    return (
        np.array(c_buyer, np.int64),
        np.array(c_seller, np.int64),
        np.array(c_qty, np.float64),
        np.array(c_price, np.float64),
        np.array(c_round, np.int64),
        inv,
        need,
        rounds,
        revenue,
        status,
    )
