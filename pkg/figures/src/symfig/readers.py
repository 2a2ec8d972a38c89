"""CSV/JSON loaders bound to the simulator's documented output schemas.

Loaders validate column presence up front and raise :class:`SchemaError`
naming the first offending column; they never recompute simulation
quantities.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def _read_rows(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header row")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return list(reader.fieldnames), rows


def _require(path, fields: list[str], needed: list[str]) -> None:
    for col in needed:
        if col not in fields:
            raise SchemaError(f"{path}: missing required column {col!r}")


def _maybe_float(raw: str) -> float | None:
    return None if raw == "" else float(raw)


def load_timeseries(path: str | Path) -> dict[str, list]:
    fields, rows = _read_rows(path)
    _require(path, fields, ["t", "mean_price", "si", "total_reward", "tau"])
    return {
        "t": [int(r["t"]) for r in rows],
        "mean_price": [_maybe_float(r["mean_price"]) for r in rows],
        "si": [float(r["si"]) for r in rows],
        "total_reward": [float(r["total_reward"]) for r in rows],
    }


def load_regret(path: str | Path) -> dict[str, list]:
    fields, rows = _read_rows(path)
    _require(path, fields, ["t", "total_regret", "rolling_median_total"])
    return {
        "t": [int(r["t"]) for r in rows],
        "total_regret": [float(r["total_regret"]) for r in rows],
        "rolling_median_total": [float(r["rolling_median_total"]) for r in rows],
    }


def load_sweep(path: str | Path) -> tuple[list[str], list[dict]]:
    """Returns (grid column names, typed rows)."""
    fields, rows = _read_rows(path)
    _require(path, fields, ["n", "price_mean", "price_std", "si_mean", "si_std"])
    grid_cols = [c for c in fields if c not in ("n", "price_mean", "price_std", "si_mean", "si_std")]
    if not grid_cols:
        raise SchemaError(f"{path}: no grid columns ahead of the statistics")
    typed = []
    for r in rows:
        row = {c: float(r[c]) for c in grid_cols}
        row["n"] = int(r["n"])
        for c in ("price_mean", "price_std", "si_mean", "si_std"):
            row[c] = _maybe_float(r[c])
        typed.append(row)
    return grid_cols, typed


def load_pdp_ice(path: str | Path) -> list[dict]:
    fields, rows = _read_rows(path)
    _require(path, fields, ["density", "line_id", "sweep_value", "si", "price"])
    return [
        {
            "density": float(r["density"]),
            "line_id": r["line_id"],
            "sweep_dim": r.get("sweep_dim", ""),
            "sweep_value": float(r["sweep_value"]),
            "si": float(r["si"]),
            "price": float(r["price"]),
        }
        for r in rows
    ]


def load_layout(path: str | Path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("width", "buyers", "sellers"):
        if key not in doc:
            raise SchemaError(f"{path}: missing required key {key!r}")
    if not doc["buyers"] and not doc["sellers"]:
        raise SchemaError(f"{path}: layout has no firms")
    return doc
