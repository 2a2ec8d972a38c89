"""Seller pricing policy: action grid, EMA value estimates, Boltzmann sampling.

The price-multiplier range is discretized into ``K`` evenly spaced arms
from ``-c_d / p_m`` (selling at the disposal penalty) up to ``1`` (selling
at the reference market price).  Arm values are tracked with an
exponential moving average and actions are drawn by softmax with an
exponentially annealed temperature.

Weights carry currency units, so states hold a ``scale`` constant (the
reward normalization, typically ``p_m * mean supply``) and probabilities
are computed as ``softmax(weights / (scale * tau))``.  With ``scale = 1``
this is the plain weights-over-temperature softmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError


@dataclass(frozen=True)
class ActionGrid:
    """Evenly spaced price multipliers from ``phi_min`` to 1 (0-based slots)."""

    phi_min: float
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def K(self) -> int:
        return int(self.values.shape[0])


def build_grid(K: int, c_d: float, p_m: float) -> ActionGrid:
    """Grid slot ``k`` holds ``phi_min + k/(K-1) * (1 - phi_min)``."""
    if K < 2:
        raise ConfigError(f"action grid needs K >= 2, got {K}")
    if not p_m > 0:
        raise ConfigError(f"p_m must be positive, got {p_m}")
    if c_d < 0:
        raise ConfigError(f"c_d must be nonnegative, got {c_d}")
    phi_min = -c_d / p_m
    return ActionGrid(phi_min=phi_min, values=np.linspace(phi_min, 1.0, K))


@dataclass(frozen=True)
class PolicyState:
    """One seller's bandit state; immutable, updates return fresh states."""

    weights: np.ndarray
    t: int
    tau: float
    tau_0: float
    tau_min: float
    decay: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        self.weights.setflags(write=False)


def initial_policy(
    K: int, tau_0: float, tau_min: float, decay: float, scale: float = 1.0
) -> PolicyState:
    """Zero-weight state at ``t = 0``; the first policy is uniform."""
    if not (tau_0 >= tau_min > 0):
        raise ConfigError(
            f"temperature schedule needs tau_0 >= tau_min > 0, got {tau_0}, {tau_min}"
        )
    if not 0.0 < decay <= 1.0:
        raise ConfigError(f"decay must lie in (0, 1], got {decay}")
    if not scale > 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    return PolicyState(
        weights=np.zeros(K, dtype=np.float64),
        t=0,
        tau=max(tau_min, tau_0),
        tau_0=tau_0,
        tau_min=tau_min,
        decay=decay,
        scale=scale,
    )


def update_weights(
    state: PolicyState, chosen_k: int, reward: float, alpha: float
) -> PolicyState:
    """EMA update of the played arm only: ``w <- alpha * w + (1 - alpha) * r``."""
    K = state.weights.shape[0]
    if not 0 <= chosen_k < K:
        raise ValueError(f"arm index {chosen_k} outside [0, {K})")
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    w = state.weights.copy()
    w[chosen_k] = alpha * w[chosen_k] + (1.0 - alpha) * reward
    return replace(state, weights=w)


def action_probabilities(state: PolicyState) -> np.ndarray:
    """Softmax of ``weights / (scale * tau)`` with max-subtraction."""
    z = state.weights / (state.scale * state.tau)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sample_action(state: PolicyState, rng: np.random.Generator) -> int:
    """Draw an arm index; consumes exactly one uniform from ``rng``."""
    p = action_probabilities(state)
    u = rng.random()
    k = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(k, p.shape[0] - 1)


def advance_temperature(state: PolicyState) -> PolicyState:
    """Advance the step counter; tau follows the closed form, never drifts."""
    t = state.t + 1
    tau = max(state.tau_min, state.tau_0 * state.decay**t)
    return replace(state, t=t, tau=tau)


def policy_snapshot(state: PolicyState) -> dict:
    """JSON-ready view of one policy state."""
    return {
        "t": state.t,
        "tau": state.tau,
        "scale": state.scale,
        "weights": [float(w) for w in state.weights],
    }
