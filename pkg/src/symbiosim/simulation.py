"""Full-run orchestration: population build, timestep loop, metric recording.

Each timestep is an independent market episode: endowments and demands
reset, sellers sample fresh price multipliers, the auction clears, rewards
feed the bandit update.  All randomness comes from three fixed sub-streams
of the master seed (layout, population draws, one policy stream per
seller), so instrumentation flags never perturb a trajectory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .auction import ClearingResult, clear_arrays
from .core import (
    STREAM_DEMAND,
    STREAM_POLICY,
    ConfigError,
    Contract,
    FirmLayout,
    MarketParams,
    substream,
)
from .learning import (
    ActionGrid,
    PolicyState,
    advance_temperature,
    build_grid,
    initial_policy,
    policy_snapshot,
    sample_action,
    update_weights,
)
from .regret import RegretRecord, counterfactual_regret
from .spatial import LayoutSpec, generate_layout


@dataclass(frozen=True)
class RunConfig:
    """A market scenario plus instrumentation switches."""

    params: MarketParams
    record_contracts: bool = False
    regret_mode: str = "off"
    snapshot_interval: int = 0

    def __post_init__(self) -> None:
        self.regret_stride  # validate eagerly
        if self.snapshot_interval < 0:
            raise ConfigError(
                f"snapshot_interval must be nonnegative, got {self.snapshot_interval}"
            )

    @property
    def regret_stride(self) -> int:
        """0 = off, 1 = every step, n = every n-th step."""
        mode = self.regret_mode
        if mode == "off":
            return 0
        if mode == "every_step":
            return 1
        if mode.startswith("sampled:") or (mode.startswith("sampled(") and mode.endswith(")")):
            raw = mode[8:-1] if mode.endswith(")") else mode[8:]
            try:
                n = int(raw)
            except ValueError:
                raise ConfigError(f"bad regret_mode {mode!r}") from None
            if n < 1:
                raise ConfigError(f"sampled regret stride must be >= 1, got {n}")
            return n
        raise ConfigError(
            f"regret_mode must be off, every_step, or sampled:N, got {mode!r}"
        )


@dataclass
class TimestepRecord:
    """Per-step aggregates; ``mean_price`` is None on no-trade steps."""

    t: int
    mean_price: float | None
    si: float
    per_seller_reward: np.ndarray
    per_seller_action: np.ndarray
    tau: float
    total_regret: float | None = None


@dataclass
class RunResult:
    config: RunConfig
    layout: FirmLayout
    records: list[TimestepRecord]
    policies: list[PolicyState]
    regret_records: list[RegretRecord] = field(default_factory=list)
    contracts: list[tuple[int, tuple[Contract, ...]]] | None = None
    snapshots: list[dict] = field(default_factory=list)
    reward_scale: float = 1.0


@dataclass(frozen=True)
class _StepContext:
    """Per-run constants shared by every timestep."""

    grid: ActionGrid
    transport: np.ndarray
    tol: np.ndarray
    supply: np.ndarray
    demand: np.ndarray
    q_to_sell: float
    q_needed: float


def build_population(params: MarketParams) -> FirmLayout:
    """Layout plus endowments, with demand rescaled to hit the target scarcity.

    Raw demands and supplies are uniform over ``demand_range``; demands are
    then multiplied by one scalar so total demand over total supply equals
    ``params.s``.  Betas are uniform over ``beta_range``.
    """
    spec = LayoutSpec(
        n_firms=params.n_firms,
        n_clusters=params.n_clusters,
        rho=params.rho,
        cs=params.cs,
        seed=params.seed,
    )
    geo = generate_layout(spec, params.buyer_fraction)
    rng = substream(params.seed, STREAM_DEMAND)
    lo, hi = params.demand_range
    raw_demand = rng.uniform(lo, hi, len(geo.buyers))
    supply = rng.uniform(lo, hi, len(geo.sellers))
    blo, bhi = params.beta_range
    betas = rng.uniform(blo, bhi, len(geo.buyers))

    total_supply = float(supply.sum())
    total_raw = float(raw_demand.sum())
    if total_supply <= 0:
        raise ConfigError("total raw supply is zero; cannot target a scarcity ratio")
    scale = params.s * total_supply / total_raw
    demand = raw_demand * scale

    buyers = tuple(
        replace(b, q_need=float(demand[i]), beta=float(betas[i]))
        for i, b in enumerate(geo.buyers)
    )
    sellers = tuple(
        replace(s, q_supply=float(supply[j])) for j, s in enumerate(geo.sellers)
    )
    return FirmLayout(buyers=buyers, sellers=sellers, dist=geo.dist, width=geo.width)


def _make_context(layout: FirmLayout, params: MarketParams) -> _StepContext:
    grid = build_grid(params.K, params.c_d, params.p_m)
    transport = layout.dist * params.c_t
    tol = layout.beta_vector() * params.p_m
    supply = layout.supply_vector()
    demand = layout.demand_vector()
    return _StepContext(
        grid=grid,
        transport=transport,
        tol=tol,
        supply=supply,
        demand=demand,
        q_to_sell=float(supply.sum()),
        q_needed=float(demand.sum()),
    )


def _step_core(
    ctx: _StepContext,
    policies: list[PolicyState],
    params: MarketParams,
    rngs: Sequence[np.random.Generator],
    t: int,
) -> tuple[TimestepRecord, list[PolicyState], ClearingResult, np.ndarray]:
    n_s = len(policies)
    tau = policies[0].tau
    actions = np.empty(n_s, dtype=np.int64)
    for j in range(n_s):
        actions[j] = sample_action(policies[j], rngs[j])
    phis = ctx.grid.values[actions]
    prices = phis[None, :] * params.p_m + ctx.transport
    qual = prices <= ctx.tol[:, None]

    clearing = clear_arrays(prices, qual, ctx.supply, ctx.demand, ctx.transport)
    rewards = clearing.seller_revenue - clearing.unsold * params.c_d

    new_policies = [
        advance_temperature(update_weights(policies[j], int(actions[j]), float(rewards[j]), params.alpha))
        for j in range(n_s)
    ]

    q_bought = float(np.sum(clearing.contract_qty))
    feasible = min(ctx.q_to_sell, ctx.q_needed)
    si = 1.0 if feasible == 0 else min(1.0, q_bought / feasible)
    if q_bought > 0:
        mean_price = float(np.sum(clearing.contract_qty * clearing.contract_price)) / q_bought
    else:
        mean_price = None

    record = TimestepRecord(
        t=t,
        mean_price=mean_price,
        si=si,
        per_seller_reward=rewards,
        per_seller_action=actions,
        tau=tau,
    )
    return record, new_policies, clearing, actions


def step(
    layout: FirmLayout,
    policies: list[PolicyState],
    params: MarketParams,
    rngs: Sequence[np.random.Generator],
    t: int = 0,
    grid: ActionGrid | None = None,
) -> tuple[TimestepRecord, list[PolicyState]]:
    """Advance one timestep: sample actions, clear, reward, learn."""
    if len(policies) != len(layout.sellers):
        raise ValueError(
            f"expected {len(layout.sellers)} policies, got {len(policies)}"
        )
    ctx = _make_context(layout, params)
    if grid is not None:
        ctx = replace(ctx, grid=grid)
    record, new_policies, _, _ = _step_core(ctx, policies, params, rngs, t)
    return record, new_policies


def reward_scale_for(params: MarketParams, layout: FirmLayout) -> float:
    """Normalization constant making softmax weights dimensionless."""
    mean_supply = float(np.mean(layout.supply_vector())) if layout.sellers else 0.0
    scale = params.p_m * mean_supply
    return scale if scale > 0 else 1.0


def run(config: RunConfig) -> RunResult:
    """Execute a full horizon; bit-deterministic for a fixed config."""
    params = config.params
    layout = build_population(params)
    ctx = _make_context(layout, params)
    scale = reward_scale_for(params, layout)
    n_s = len(layout.sellers)
    policies = [
        initial_policy(params.K, params.tau_0, params.tau_min, params.decay, scale)
        for _ in range(n_s)
    ]
    rngs = [substream(params.seed, STREAM_POLICY, j) for j in range(n_s)]

    stride = config.regret_stride
    records: list[TimestepRecord] = []
    regrets: list[RegretRecord] = []
    contracts: list[tuple[int, tuple[Contract, ...]]] | None = (
        [] if config.record_contracts else None
    )
    snapshots: list[dict] = []

    for t in range(params.horizon):
        record, policies, clearing, actions = _step_core(ctx, policies, params, rngs, t)
        if stride and t % stride == 0:
            rr = counterfactual_regret(layout, params, actions, ctx.grid, t=t)
            record.total_regret = rr.total_regret
            regrets.append(rr)
        if contracts is not None:
            contracts.append((t, clearing.contracts))
        if config.snapshot_interval and t % config.snapshot_interval == 0:
            snapshots.append(
                {"t": t, "sellers": [policy_snapshot(p) for p in policies]}
            )
        records.append(record)

    return RunResult(
        config=config,
        layout=layout,
        records=records,
        policies=policies,
        regret_records=regrets,
        contracts=contracts,
        snapshots=snapshots,
        reward_scale=scale,
    )


def final_window_outcome(
    result: RunResult, window: int = 100
) -> tuple[float, float]:
    """(symbiosis, price) over the trailing window, quantity-weighted.

    Per-step traded quantity is proportional to the step's symbiosis index
    (the feasible total is constant across steps), so the pooled price uses
    si as the weight.  Windows with no trades impute the buyers' outside
    option ``p_m``.
    """
    params = result.config.params
    recs = result.records[-window:] if window > 0 else []
    if not recs:
        return 1.0, params.p_m
    si = float(np.mean([r.si for r in recs]))
    num = 0.0
    den = 0.0
    for r in recs:
        if r.mean_price is not None and r.si > 0:
            num += r.mean_price * r.si
            den += r.si
    price = num / den if den > 0 else params.p_m
    return si, price


def write_timeseries_csv(result: RunResult, path) -> None:
    """One row per timestep: t, mean_price, si, total_reward, total_regret, tau."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mean_price", "si", "total_reward", "total_regret", "tau"])
        for r in result.records:
            w.writerow(
                [
                    r.t,
                    "" if r.mean_price is None else repr(r.mean_price),
                    repr(r.si),
                    repr(float(np.sum(r.per_seller_reward))),
                    "" if r.total_regret is None else repr(r.total_regret),
                    repr(r.tau),
                ]
            )
