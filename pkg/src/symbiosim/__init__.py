"""Deterministic simulator of a decentralized spatial byproduct market."""

from .core import (
    Buyer,
    ConfigError,
    Contract,
    FirmLayout,
    MarketParams,
    Seller,
    price_of,
    scarcity,
    seller_reward,
)
from .auction import ClearingResult, run_auction
from .learning import ActionGrid, PolicyState, build_grid, sample_action
from .metrics import symbiosis_index, weighted_mean_price
from .regret import RegretRecord, counterfactual_regret, rolling_median
from .simulation import RunConfig, RunResult, TimestepRecord, build_population, run, step
from .spatial import LayoutSpec, distance_matrix, generate_layout

__version__ = "0.1.0"

__all__ = [
    "ActionGrid",
    "Buyer",
    "ClearingResult",
    "ConfigError",
    "Contract",
    "FirmLayout",
    "LayoutSpec",
    "MarketParams",
    "PolicyState",
    "RegretRecord",
    "RunConfig",
    "RunResult",
    "Seller",
    "TimestepRecord",
    "build_grid",
    "build_population",
    "counterfactual_regret",
    "distance_matrix",
    "generate_layout",
    "price_of",
    "rolling_median",
    "run",
    "run_auction",
    "sample_action",
    "scarcity",
    "seller_reward",
    "step",
    "symbiosis_index",
    "weighted_mean_price",
    "__version__",
]
