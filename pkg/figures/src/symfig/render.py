"""Figure construction for the five supported kinds.

Rendering is strictly presentational: every plotted value comes straight
from a loaded file.  matplotlib runs on the Agg backend so figures build
headlessly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    load_layout,
    load_pdp_ice,
    load_regret,
    load_sweep,
    load_timeseries,
)

KINDS = ("price", "regret", "sweep", "layout", "pdp_ice")


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, output image, reference lines."""

    inputs: tuple[str, ...]
    kind: str
    output: str
    p_m: float | None = None
    c_d: float | None = None
    metric: str = "price"
    x: str | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")


def _label_for(spec: FigureSpec, i: int) -> str:
    if i < len(spec.labels):
        return spec.labels[i]
    return Path(spec.inputs[i]).parent.name or Path(spec.inputs[i]).stem


def _render_price(spec: FigureSpec, ax) -> None:
    for i, path in enumerate(spec.inputs):
        data = load_timeseries(path)
        t = [tt for tt, p in zip(data["t"], data["mean_price"]) if p is not None]
        p = [p for p in data["mean_price"] if p is not None]
        ax.plot(t, p, lw=1.0, label=_label_for(spec, i))
    if spec.p_m is not None:
        ax.axhline(spec.p_m, color="black", ls="--", lw=1, label="market price")
    if spec.c_d is not None:
        ax.axhline(-spec.c_d, color="firebrick", ls=":", lw=1, label="disposal floor")
    ax.set_xlabel("timestep")
    ax.set_ylabel("mean transaction price")
    ax.legend(fontsize=8)


def _render_regret(spec: FigureSpec, ax) -> None:
    for i, path in enumerate(spec.inputs):
        data = load_regret(path)
        ax.plot(data["t"], data["rolling_median_total"], lw=1.2, label=_label_for(spec, i))
    ax.set_xlabel("timestep")
    ax.set_ylabel("rolling median of per-step total regret")
    ax.legend(fontsize=8)


def _render_sweep(spec: FigureSpec, ax) -> None:
    mean_col = "si_mean" if spec.metric == "si" else "price_mean"
    std_col = "si_std" if spec.metric == "si" else "price_std"
    for path in spec.inputs:
        grid_cols, rows = load_sweep(path)
        x_col = spec.x or grid_cols[0]
        if x_col not in grid_cols:
            raise SchemaError(f"{path}: missing required column {x_col!r}")
        series_cols = [c for c in grid_cols if c != x_col]
        groups: dict[tuple, list[dict]] = {}
        for row in rows:
            groups.setdefault(tuple(row[c] for c in series_cols), []).append(row)
        for key, group in sorted(groups.items()):
            group = sorted(group, key=lambda r: r[x_col])
            xs = np.array([r[x_col] for r in group])
            mean = np.array([r[mean_col] for r in group], dtype=float)
            std = np.array([r[std_col] for r in group], dtype=float)
            label = ", ".join(f"{c}={v:g}" for c, v in zip(series_cols, key)) or x_col
            ax.plot(xs, mean, marker="o", ms=3, lw=1.2, label=label)
            ax.fill_between(xs, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel(spec.x or "grid value")
    ax.set_ylabel(mean_col)
    ax.legend(fontsize=7)


def _render_layout(spec: FigureSpec, ax) -> None:
    doc = load_layout(spec.inputs[0])
    bx = [b["x"] for b in doc["buyers"]]
    by = [b["y"] for b in doc["buyers"]]
    sx = [s["x"] for s in doc["sellers"]]
    sy = [s["y"] for s in doc["sellers"]]
    ax.scatter(bx, by, marker="o", s=25, label="buyers")
    ax.scatter(sx, sy, marker="s", s=25, label="sellers")
    w = doc["width"]
    ax.set_xlim(0, w)
    ax.set_ylim(0, w)
    ax.set_aspect("equal")
    ax.set_xlabel("km")
    ax.set_ylabel("km")
    ax.legend(fontsize=8)


def _render_pdp_ice(spec: FigureSpec, ax) -> None:
    rows = load_pdp_ice(spec.inputs[0])
    metric = spec.metric if spec.metric in ("si", "price") else "price"
    levels = sorted({r["density"] for r in rows})
    cmap = plt.get_cmap("viridis")
    for li, level in enumerate(levels):
        color = cmap(0.15 + 0.7 * li / max(1, len(levels) - 1))
        ice = {}
        pdp = []
        for r in rows:
            if r["density"] != level:
                continue
            if r["line_id"] == "pdp":
                pdp.append((r["sweep_value"], r[metric]))
            else:
                ice.setdefault(r["line_id"], []).append((r["sweep_value"], r[metric]))
        for line in ice.values():
            xs, ys = zip(*sorted(line))
            ax.plot(xs, ys, color=color, alpha=0.35, lw=0.8)
        xs, ys = zip(*sorted(pdp))
        ax.plot(xs, ys, color="black", lw=2.0)
        ax.plot([], [], color=color, label=f"density {level:g}")
    dim = rows[0]["sweep_dim"] or "sweep value"
    ax.set_xlabel(dim)
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)


_RENDERERS = {
    "price": _render_price,
    "regret": _render_regret,
    "sweep": _render_sweep,
    "layout": _render_layout,
    "pdp_ice": _render_pdp_ice,
}


def render(spec: FigureSpec) -> Path:
    """Build the figure and write it to ``spec.output``; returns the path."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=120)
    try:
        _RENDERERS[spec.kind](spec, ax)
        fig.tight_layout()
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return Path(spec.output)
