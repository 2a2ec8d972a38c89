"""Global sensitivity pipeline: LHS designs, Sobol indices, PDP/ICE tables.

Sampling happens in each dimension's transformed space (lin, log2, or
log10), so log-scaled dimensions get log-uniform marginals.  Sobol first
and total-order indices are estimated from a Saltelli A/B/AB design of
exactly ``n * (k + 2)`` model evaluations (``n * (2k + 2)`` when pairwise
second-order indices are requested), using scrambled Sobol' base matrices
and the standard variance-normalized estimators.  PDP/ICE tables are
computed by direct model evaluation over a sweep grid against LHS
background points, at fixed levels of the density dimension.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .core import ConfigError, MarketParams
from .simulation import RunConfig, final_window_outcome, run

_TRANSFORMS = ("linear", "log2", "log10")


@dataclass(frozen=True)
class Dimension:
    """One swept input with bounds in raw units and a sampling transform."""

    name: str
    low: float
    high: float
    transform: str = "linear"

    def __post_init__(self) -> None:
        if self.transform not in _TRANSFORMS:
            raise ConfigError(
                f"dimension {self.name}: transform must be one of {_TRANSFORMS}"
            )
        if not self.low < self.high:
            raise ConfigError(f"dimension {self.name}: need low < high")
        if self.transform != "linear" and self.low <= 0:
            raise ConfigError(f"dimension {self.name}: log scales need positive bounds")

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map unit-interval samples into raw units via the transform."""
        u = np.asarray(u, dtype=np.float64)
        if self.transform == "linear":
            x = self.low + u * (self.high - self.low)
        elif self.transform == "log2":
            lo, hi = np.log2(self.low), np.log2(self.high)
            x = np.exp2(lo + u * (hi - lo))
        else:
            lo, hi = np.log10(self.low), np.log10(self.high)
            x = 10.0 ** (lo + u * (hi - lo))
        return np.clip(x, self.low, self.high)


@dataclass(frozen=True)
class ParamSpace:
    """An ordered tuple of dimensions defining the sampled hypercube."""

    dims: tuple[Dimension, ...]

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown dimension {name!r}; have {self.names}") from None

    def from_unit(self, unit: np.ndarray) -> np.ndarray:
        """Map an (n, k) unit-hypercube sample into raw coordinates."""
        unit = np.asarray(unit, dtype=np.float64)
        out = np.empty_like(unit)
        for d, dim in enumerate(self.dims):
            out[:, d] = dim.from_unit(unit[:, d])
        return out

    def drop(self, *names: str) -> "ParamSpace":
        keep = tuple(d for d in self.dims if d.name not in names)
        return ParamSpace(dims=keep)


def market_space() -> ParamSpace:
    """The five standard swept inputs."""
    return ParamSpace(
        dims=(
            Dimension("c_d", 0.0, 200.0, "linear"),
            Dimension("s", 0.25, 2.0, "log2"),
            Dimension("rho", 1e-5, 1e-1, "log10"),
            Dimension("cs", 0.0, 0.5, "linear"),
            Dimension("c_t", 0.0, 10.0, "linear"),
        )
    )


def lhs_sample(space: ParamSpace, n: int, seed: int) -> np.ndarray:
    """Latin hypercube: per dimension, one jittered sample in each of n bins."""
    if n < 1:
        raise ConfigError(f"lhs_sample needs n >= 1, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    unit = np.empty((n, space.k), dtype=np.float64)
    for d in range(space.k):
        perm = rng.permutation(n)
        unit[:, d] = (perm + rng.uniform(size=n)) / n
    return space.from_unit(unit)


@dataclass
class SobolResult:
    """Estimated indices plus the full design and raw outputs for auditing."""

    space: ParamSpace
    s1: np.ndarray  # (n_outputs, k)
    st: np.ndarray  # (n_outputs, k)
    s2: np.ndarray | None  # (n_outputs, k, k), symmetric, diag 0
    design: np.ndarray  # (n_evaluations, k)
    blocks: list[str]  # per-row block tag: A, B, AB<i>, BA<i>
    outputs: np.ndarray  # (n_evaluations, n_outputs)
    n_evaluations: int
    degenerate: np.ndarray  # (n_outputs,) bool, True when output variance is 0


def _as_outputs(values: Iterable) -> np.ndarray:
    rows = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in values]
    return np.vstack(rows)


def sobol_estimate(
    space: ParamSpace,
    base_n: int,
    model: Callable[[np.ndarray], np.ndarray],
    seed: int,
    second_order: bool = False,
    mapper: Callable = map,
) -> SobolResult:
    """Saltelli-design estimation of first and total-order Sobol indices.

    ``model`` maps one raw-coordinate point to one or more outputs and must
    be deterministic given the point.  ``mapper`` may be a parallel map;
    rows are independent.
    """
    if base_n < 1:
        raise ConfigError(f"base_n must be >= 1, got {base_n}")
    k = space.k
    sob = qmc.Sobol(d=2 * k, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non-power-of-two smoke budgets
        base = sob.random(base_n)
    A_u, B_u = base[:, :k], base[:, k:]

    blocks: list[str] = []
    unit_rows: list[np.ndarray] = []
    unit_rows.append(A_u)
    blocks += ["A"] * base_n
    unit_rows.append(B_u)
    blocks += ["B"] * base_n
    for i in range(k):
        ab = A_u.copy()
        ab[:, i] = B_u[:, i]
        unit_rows.append(ab)
        blocks += [f"AB{i}"] * base_n
    if second_order:
        for i in range(k):
            ba = B_u.copy()
            ba[:, i] = A_u[:, i]
            unit_rows.append(ba)
            blocks += [f"BA{i}"] * base_n

    design = space.from_unit(np.vstack(unit_rows))
    outputs = _as_outputs(mapper(model, list(design)))
    if outputs.shape[0] != design.shape[0]:
        raise RuntimeError("model evaluation count does not match the design")
    m = outputs.shape[1]

    fA = outputs[:base_n]
    fB = outputs[base_n : 2 * base_n]
    fAB = np.stack(
        [outputs[(2 + i) * base_n : (3 + i) * base_n] for i in range(k)]
    )  # (k, n, m)
    if second_order:
        fBA = np.stack(
            [outputs[(2 + k + i) * base_n : (3 + k + i) * base_n] for i in range(k)]
        )

    s1 = np.zeros((m, k))
    st = np.zeros((m, k))
    s2 = np.zeros((m, k, k)) if second_order else None
    degenerate = np.zeros(m, dtype=bool)
    for o in range(m):
        a, b = fA[:, o], fB[:, o]
        var = np.var(np.concatenate([a, b]))
        if var <= 0.0 or not np.isfinite(var):
            degenerate[o] = True
            warnings.warn(
                f"output {o}: zero variance across the design; indices set to 0",
                stacklevel=2,
            )
            continue
        for i in range(k):
            abi = fAB[i, :, o]
            s1[o, i] = np.mean(b * (abi - a)) / var
            st[o, i] = 0.5 * np.mean((a - abi) ** 2) / var
        if second_order:
            for i in range(k):
                for j in range(i + 1, k):
                    vij = np.mean(fBA[i, :, o] * fAB[j, :, o] - a * b) / var
                    val = vij - s1[o, i] - s1[o, j]
                    s2[o, i, j] = val
                    s2[o, j, i] = val

    return SobolResult(
        space=space,
        s1=s1,
        st=st,
        s2=s2,
        design=design,
        blocks=blocks,
        outputs=outputs,
        n_evaluations=design.shape[0],
        degenerate=degenerate,
    )


@dataclass
class PdpIceResult:
    """ICE lines and their pointwise-mean PDP, per fixed density level."""

    sweep_dim: str
    density_dim: str
    levels: tuple[float, ...]
    sweep_values: np.ndarray  # (grid_n,)
    ice: np.ndarray  # (n_levels, background_n, grid_n, n_outputs)
    pdp: np.ndarray  # (n_levels, grid_n, n_outputs)

    def rows(self) -> list[tuple]:
        """Flat rows: (density_level, line_id or 'pdp', sweep_value, *outputs)."""
        out: list[tuple] = []
        n_levels, n_bg, grid_n, _ = self.ice.shape
        for li in range(n_levels):
            for b in range(n_bg):
                for g in range(grid_n):
                    out.append(
                        (self.levels[li], str(b), float(self.sweep_values[g]))
                        + tuple(float(v) for v in self.ice[li, b, g])
                    )
            for g in range(grid_n):
                out.append(
                    (self.levels[li], "pdp", float(self.sweep_values[g]))
                    + tuple(float(v) for v in self.pdp[li, g])
                )
        return out


def pdp_ice(
    space: ParamSpace,
    sweep_dim: str,
    fixed_density_levels: Sequence[float],
    grid_n: int,
    background_n: int,
    model: Callable[[np.ndarray], np.ndarray],
    seed: int,
    density_dim: str = "rho",
    mapper: Callable = map,
) -> PdpIceResult:
    """ICE lines over a sweep grid with the other dimensions LHS-sampled."""
    if grid_n < 2:
        raise ConfigError(f"grid_n must be >= 2, got {grid_n}")
    if background_n < 1:
        raise ConfigError(f"background_n must be >= 1, got {background_n}")
    if sweep_dim == density_dim:
        raise ConfigError("sweep_dim must differ from the fixed density dimension")
    sweep_idx = space.index_of(sweep_dim)
    density_idx = space.index_of(density_dim)
    sweep = space.dims[sweep_idx].from_unit(np.linspace(0.0, 1.0, grid_n))

    rest = space.drop(sweep_dim, density_dim)
    rest_idx = [space.index_of(d.name) for d in rest.dims]

    points: list[np.ndarray] = []
    for li, level in enumerate(fixed_density_levels):
        bg_seed = int(
            np.random.SeedSequence(entropy=seed, spawn_key=(li,)).generate_state(1)[0]
        )
        bg = lhs_sample(rest, background_n, bg_seed) if rest.k else np.zeros((background_n, 0))
        for b in range(background_n):
            for g in range(grid_n):
                pt = np.empty(space.k)
                pt[density_idx] = level
                pt[sweep_idx] = sweep[g]
                for ri, di in enumerate(rest_idx):
                    pt[di] = bg[b, ri]
                points.append(pt)

    outputs = _as_outputs(mapper(model, points))
    m = outputs.shape[1]
    ice = outputs.reshape(len(fixed_density_levels), background_n, grid_n, m)
    pdp = ice.mean(axis=1)
    return PdpIceResult(
        sweep_dim=sweep_dim,
        density_dim=density_dim,
        levels=tuple(float(x) for x in fixed_density_levels),
        sweep_values=sweep,
        ice=ice,
        pdp=pdp,
    )


@dataclass(frozen=True)
class ScenarioOutcome:
    """One simulator evaluation at one design point."""

    point: tuple[float, ...]
    replicate: int
    final_si: float
    final_price: float


def _point_seed(master_seed: int, point: np.ndarray, replicate: int) -> int:
    """Deterministic-given-point replicate seed (order-insensitive)."""
    digest = hashlib.blake2b(
        np.ascontiguousarray(point, dtype=np.float64).tobytes(), digest_size=8
    ).digest()
    h = int.from_bytes(digest, "little")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(h, replicate))
    return int(ss.generate_state(1)[0])


class MarketModel:
    """Picklable point -> (final_si, final_price) simulator closure.

    Replicates are averaged inside the call, each on its own seed derived
    from the master seed and the point itself, so the model is
    deterministic given the point regardless of evaluation order.
    """

    def __init__(
        self,
        base_params: MarketParams,
        space: ParamSpace | None = None,
        replicates: int = 2,
        window: int = 100,
    ) -> None:
        self.base_params = base_params
        self.space = space if space is not None else market_space()
        self.replicates = replicates
        self.window = window

    def outcomes(self, point: np.ndarray) -> list[ScenarioOutcome]:
        point = np.asarray(point, dtype=np.float64)
        updates = dict(zip(self.space.names, (float(x) for x in point)))
        outs = []
        for r in range(self.replicates):
            seed = _point_seed(self.base_params.seed, point, r)
            params = replace(self.base_params, seed=seed, **updates)
            result = run(RunConfig(params=params))
            si, price = final_window_outcome(result, window=self.window)
            outs.append(
                ScenarioOutcome(
                    point=tuple(float(x) for x in point),
                    replicate=r,
                    final_si=si,
                    final_price=price,
                )
            )
        return outs

    def __call__(self, point: np.ndarray) -> np.ndarray:
        outs = self.outcomes(point)
        si = float(np.mean([o.final_si for o in outs]))
        price = float(np.mean([o.final_price for o in outs]))
        return np.array([si, price])
