"""Command-line entry points, config files, batch execution, file emission.

Config files are flat ``key = value`` text with ``#`` comments.  Keys mirror
``MarketParams`` field names; run-level switches use a ``run.`` prefix
(``run.regret_mode``, ``run.record_contracts``, ``run.snapshot_interval``).
``--override key=value`` wins over the file.  All CSV output uses
round-tripping float repr, and every emitted data file is listed with its
sha256 in ``manifest.json``; re-running with the recorded config and seed
reproduces every data file bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConfigError, MarketParams
from .regret import rolling_median
from .sensitivity import MarketModel, market_space, pdp_ice, sobol_estimate
from .simulation import (
    RunConfig,
    build_population,
    final_window_outcome,
    run,
    write_timeseries_csv,
)
from .spatial import layout_to_json

SCHEMA_VERSION = 1

_FLOAT_FIELDS = {
    "c_d", "s", "rho", "p_m", "c_t", "cs", "buyer_fraction",
    "alpha", "tau_0", "tau_min", "decay",
}
_INT_FIELDS = {"n_firms", "n_clusters", "K", "horizon", "seed"}
_PAIR_FIELDS = {"beta_range", "demand_range"}
_REQUIRED_FIELDS = ("c_d", "s", "rho")
_RUN_FIELDS = {"run.record_contracts", "run.regret_mode", "run.snapshot_interval"}


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"field {key}: expected a boolean, got {raw!r}")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Raw key -> value strings; line-numbered diagnostics on bad syntax."""
    entries: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, value = stripped.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def apply_overrides(entries: dict[str, str], overrides: list[str] | None) -> dict[str, str]:
    merged = dict(entries)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = item.split("=", 1)
        merged[key.strip()] = value.strip()
    return merged


def build_settings(entries: dict[str, str]) -> tuple[MarketParams, dict]:
    """Typed (MarketParams, run-level switches) from raw strings."""
    known = _FLOAT_FIELDS | _INT_FIELDS | _PAIR_FIELDS | _RUN_FIELDS
    for key in entries:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    for key in _REQUIRED_FIELDS:
        if key not in entries:
            raise ConfigError(f"missing required field {key!r}")

    kwargs: dict = {}
    for key, raw in entries.items():
        if key in _RUN_FIELDS:
            continue
        try:
            if key in _FLOAT_FIELDS:
                kwargs[key] = float(raw)
            elif key in _INT_FIELDS:
                kwargs[key] = int(raw)
            else:
                parts = [p for p in raw.replace(",", " ").split() if p]
                if len(parts) != 2:
                    raise ValueError("expected two numbers")
                kwargs[key] = (float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"field {key}: cannot parse {raw!r} ({exc})") from None

    params = MarketParams(**kwargs)
    run_opts = {
        "record_contracts": _parse_bool(
            entries.get("run.record_contracts", "false"), "run.record_contracts"
        ),
        "regret_mode": entries.get("run.regret_mode", "off"),
        "snapshot_interval": int(entries.get("run.snapshot_interval", "0")),
    }
    return params, run_opts


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _config_doc(params: MarketParams, run_opts: dict | None = None) -> dict:
    doc = asdict(params)
    doc["beta_range"] = list(doc["beta_range"])
    doc["demand_range"] = list(doc["demand_range"])
    if run_opts:
        doc["run"] = dict(run_opts)
    return doc


def _config_hash(config_doc: dict) -> str:
    return hashlib.sha256(
        json.dumps(config_doc, sort_keys=True).encode()
    ).hexdigest()


def write_manifest(
    out_dir: Path,
    command: str,
    config_doc: dict,
    master_seed: int,
    files: list[Path],
    extra: dict | None = None,
) -> Path:
    manifest = {
        "tool": "symbiosim",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config_doc,
        "config_sha256": _config_hash(config_doc),
        "master_seed": master_seed,
        "files": {p.name: _sha256(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_cell(v) for v in row])


def default_workers() -> int:
    env = os.environ.get("SYMBIOSIM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# run

def cmd_run(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, run_opts = build_settings(entries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    result = run(RunConfig(params=params, **run_opts))
    wall = time.perf_counter() - t0

    files = []
    ts_path = out_dir / "timeseries.csv"
    write_timeseries_csv(result, ts_path)
    files.append(ts_path)

    if result.contracts is not None:
        c_path = out_dir / "contracts.jsonl"
        with open(c_path, "w") as fh:
            for t, contracts in result.contracts:
                for c in contracts:
                    fh.write(
                        json.dumps(
                            {
                                "t": t,
                                "round": c.round,
                                "buyer": c.buyer_id,
                                "seller": c.seller_id,
                                "qty": c.qty,
                                "unit_price": c.unit_price,
                            }
                        )
                        + "\n"
                    )
        files.append(c_path)

    if result.snapshots:
        s_path = out_dir / "snapshots.jsonl"
        with open(s_path, "w") as fh:
            for snap in result.snapshots:
                fh.write(json.dumps(snap) + "\n")
        files.append(s_path)

    si, price = final_window_outcome(result)
    write_manifest(
        out_dir,
        "run",
        _config_doc(params, run_opts),
        params.seed,
        files,
        extra={
            "timing": {"wall_s": wall},
            "final_si": si,
            "final_price": price,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# sweep

def parse_grid_spec(spec: str) -> tuple[str, list[float]]:
    """``name=v1,v2,...`` or ``name=lo:hi:step`` (inclusive endpoints)."""
    if "=" not in spec:
        raise ConfigError(f"grid spec {spec!r}: expected name=values")
    name, raw = spec.split("=", 1)
    name = name.strip()
    raw = raw.strip()
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {spec!r}: ranges are lo:hi:step")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ConfigError(f"grid spec {spec!r}: bad range")
        n = int(round((hi - lo) / step))
        values = [lo + i * step for i in range(n + 1) if lo + i * step <= hi + 1e-12]
    else:
        values = [float(p) for p in raw.split(",") if p.strip()]
    if not values:
        raise ConfigError(f"grid spec {spec!r}: no values")
    return name, values


def expand_grid(specs: list[str]) -> tuple[list[str], list[tuple[float, ...]]]:
    names: list[str] = []
    lists: list[list[float]] = []
    for spec in specs:
        name, values = parse_grid_spec(spec)
        if name in names:
            raise ConfigError(f"grid dimension {name!r} given twice")
        names.append(name)
        lists.append(values)
    cells = list(itertools.product(*lists))
    return names, cells


def derive_run_seed(master_seed: int, run_index: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(run_index,))
    return int(ss.generate_state(1)[0])


def _sweep_worker(item: dict) -> dict:
    """Executes one run of a sweep; returns a summary (picklable)."""
    t0 = time.perf_counter()
    out = {
        "run_id": item["run_id"],
        "cell": item["cell"],
        "seed": item["seed"],
        "status": "ok",
        "error": "",
    }
    try:
        params = MarketParams(**item["params"])
        result = run(RunConfig(params=params))
        si, price = final_window_outcome(result)
        run_dir = Path(item["run_dir"])
        run_dir.mkdir(parents=True, exist_ok=True)
        ts = run_dir / "timeseries.csv"
        write_timeseries_csv(result, ts)
        out.update(
            final_si=si,
            final_price=price,
            files={str(ts.relative_to(item["out_dir"])): _sha256(ts)},
        )
    except Exception as exc:  # recorded in the manifest, sweep exits nonzero
        out["status"] = "failed"
        out["error"] = f"{type(exc).__name__}: {exc}"
        out["files"] = {}
    out["duration_s"] = time.perf_counter() - t0
    return out


def cmd_sweep(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, _ = build_settings(entries)
    names, cells = expand_grid(args.grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    replicates = args.replicates
    workers = args.workers or default_workers()

    for name in names:
        if name not in _FLOAT_FIELDS | _INT_FIELDS:
            raise ConfigError(f"grid dimension {name!r} is not a numeric parameter")

    # Cell values are validated inside the worker so that a bad cell is
    # recorded as a failed run instead of aborting the whole sweep.
    base_doc = _config_doc(params)
    base_doc["beta_range"] = tuple(base_doc["beta_range"])
    base_doc["demand_range"] = tuple(base_doc["demand_range"])
    items = []
    for ci, cell in enumerate(cells):
        for rep in range(replicates):
            run_id = ci * replicates + rep
            seed = derive_run_seed(params.seed, run_id)
            doc = dict(base_doc)
            for name, value in zip(names, cell):
                doc[name] = int(value) if name in _INT_FIELDS else value
            doc["seed"] = seed
            items.append(
                {
                    "run_id": run_id,
                    "cell": list(cell),
                    "seed": seed,
                    "params": doc,
                    "run_dir": str(out_dir / "runs" / f"run_{run_id:05d}"),
                    "out_dir": str(out_dir),
                }
            )

    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_sweep_worker, items))
    else:
        summaries = [_sweep_worker(item) for item in items]
    wall = time.perf_counter() - t0
    summaries.sort(key=lambda s: s["run_id"])

    agg_rows = []
    for ci, cell in enumerate(cells):
        group = [s for s in summaries if s["run_id"] // replicates == ci and s["status"] == "ok"]
        prices = np.array([s["final_price"] for s in group])
        sis = np.array([s["final_si"] for s in group])
        n = len(group)
        agg_rows.append(
            list(cell)
            + [
                n,
                float(prices.mean()) if n else None,
                float(prices.std(ddof=1)) if n > 1 else 0.0,
                float(sis.mean()) if n else None,
                float(sis.std(ddof=1)) if n > 1 else 0.0,
            ]
        )
    sweep_path = out_dir / "sweep.csv"
    _write_csv(
        sweep_path,
        names + ["n", "price_mean", "price_std", "si_mean", "si_std"],
        agg_rows,
    )

    n_failed = sum(1 for s in summaries if s["status"] != "ok")
    file_map: dict[str, str] = {"sweep.csv": _sha256(sweep_path)}
    for s in summaries:
        file_map.update(s.get("files", {}))
    manifest = {
        "tool": "symbiosim",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "config": _config_doc(params),
        "config_sha256": _config_hash(_config_doc(params)),
        "master_seed": params.seed,
        "grid": {name: [c[i] for c in cells] for i, name in enumerate(names)},
        "grid_names": names,
        "replicates": replicates,
        "workers": workers,
        "runs": [
            {k: s[k] for k in ("run_id", "cell", "seed", "status", "error", "duration_s")}
            for s in summaries
        ],
        "timing": {"wall_s": wall, "per_run_s": [s["duration_s"] for s in summaries]},
        "throughput_runs_per_min": len(summaries) / (wall / 60.0) if wall > 0 else None,
        "files": file_map,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if n_failed:
        print(f"sweep: {n_failed}/{len(summaries)} runs failed", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# sobol / pdp

def _pool_mapper(workers: int):
    if workers <= 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=workers)
    return pool.map, pool


def cmd_sobol(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, _ = build_settings(entries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = market_space()
    model = MarketModel(params, space=space, replicates=args.replicates)
    workers = args.workers or default_workers()
    mapper, pool = _pool_mapper(workers)
    t0 = time.perf_counter()
    try:
        result = sobol_estimate(
            space,
            args.base_n,
            model,
            seed=params.seed,
            second_order=args.second_order,
            mapper=mapper,
        )
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - t0

    names = list(space.names)
    design_path = out_dir / "sobol_design.csv"
    _write_csv(
        design_path,
        ["row", "block"] + names,
        [
            [i, result.blocks[i]] + [float(v) for v in result.design[i]]
            for i in range(result.n_evaluations)
        ],
    )
    outcomes_path = out_dir / "sobol_outcomes.csv"
    _write_csv(
        outcomes_path,
        ["row", "si", "price"],
        [
            [i, float(result.outputs[i, 0]), float(result.outputs[i, 1])]
            for i in range(result.n_evaluations)
        ],
    )
    idx_rows = []
    for o, output in enumerate(("si", "price")):
        for i, name in enumerate(names):
            idx_rows.append([output, "S1", name, "", float(result.s1[o, i])])
        for i, name in enumerate(names):
            idx_rows.append([output, "ST", name, "", float(result.st[o, i])])
        if result.s2 is not None:
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    idx_rows.append(
                        [output, "S2", names[i], names[j], float(result.s2[o, i, j])]
                    )
    indices_path = out_dir / "sobol_indices.csv"
    _write_csv(indices_path, ["output", "kind", "dim_i", "dim_j", "value"], idx_rows)

    write_manifest(
        out_dir,
        "sobol",
        _config_doc(params),
        params.seed,
        [design_path, outcomes_path, indices_path],
        extra={
            "space": [asdict(d) for d in space.dims],
            "base_n": args.base_n,
            "second_order": args.second_order,
            "replicates": args.replicates,
            "n_evaluations": result.n_evaluations,
            "workers": workers,
            "timing": {"wall_s": wall},
        },
    )
    return 0


def cmd_pdp(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, _ = build_settings(entries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = market_space()
    levels = [float(x) for x in args.density_levels.split(",") if x.strip()]
    model = MarketModel(params, space=space, replicates=args.replicates)
    workers = args.workers or default_workers()
    mapper, pool = _pool_mapper(workers)
    t0 = time.perf_counter()
    try:
        table = pdp_ice(
            space,
            args.sweep_dim,
            levels,
            args.grid_n,
            args.background_n,
            model,
            seed=params.seed,
            mapper=mapper,
        )
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - t0

    path = out_dir / "pdp_ice.csv"
    _write_csv(
        path,
        ["density", "line_id", "sweep_dim", "sweep_value", "si", "price"],
        [[r[0], r[1], args.sweep_dim, r[2], r[3], r[4]] for r in table.rows()],
    )
    write_manifest(
        out_dir,
        "pdp",
        _config_doc(params),
        params.seed,
        [path],
        extra={
            "sweep_dim": args.sweep_dim,
            "density_levels": levels,
            "grid_n": args.grid_n,
            "background_n": args.background_n,
            "replicates": args.replicates,
            "workers": workers,
            "timing": {"wall_s": wall},
        },
    )
    return 0


# ---------------------------------------------------------------------------
# regret / layout

def cmd_regret(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, run_opts = build_settings(entries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode = "every_step" if args.every == 1 else f"sampled:{args.every}"
    run_opts["regret_mode"] = mode

    t0 = time.perf_counter()
    result = run(RunConfig(params=params, **run_opts))
    wall = time.perf_counter() - t0

    n_s = len(result.layout.sellers)
    totals = [rr.total_regret for rr in result.regret_records]
    medians = rolling_median(totals, args.window) if totals else np.array([])
    rows = []
    for i, rr in enumerate(result.regret_records):
        rows.append(
            [rr.t]
            + [float(x) for x in rr.per_seller_regret]
            + [rr.total_regret, rr.mean_regret, float(medians[i])]
        )
    regret_path = out_dir / "regret.csv"
    _write_csv(
        regret_path,
        ["t"]
        + [f"regret_{j:02d}" for j in range(n_s)]
        + ["total_regret", "mean_regret", "rolling_median_total"],
        rows,
    )
    ts_path = out_dir / "timeseries.csv"
    write_timeseries_csv(result, ts_path)
    write_manifest(
        out_dir,
        "regret",
        _config_doc(params, run_opts),
        params.seed,
        [regret_path, ts_path],
        extra={"window": args.window, "every": args.every, "timing": {"wall_s": wall}},
    )
    return 0


def cmd_layout(args: argparse.Namespace) -> int:
    entries = apply_overrides(read_config_file(args.config), args.override)
    params, _ = build_settings(entries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    layout = build_population(params)
    path = out_dir / "layout.json"
    path.write_text(layout_to_json(layout, seed=params.seed))
    write_manifest(out_dir, "layout", _config_doc(params), params.seed, [path])
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="symbiosim",
        description="Decentralized spatial byproduct-market simulator",
    )
    p.add_argument("--version", action="version", version=f"symbiosim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="flat key=value config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config field (repeatable)",
        )

    sp = sub.add_parser("run", help="one simulation run")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="grid of runs with replicates")
    common(sp)
    sp.add_argument("--grid", action="append", required=True, metavar="NAME=V1,V2|LO:HI:STEP")
    sp.add_argument("--replicates", type=int, default=10)
    sp.add_argument("--workers", type=int, default=0, help="0 = SYMBIOSIM_WORKERS or cpu count")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("sobol", help="Sobol sensitivity indices by direct simulation")
    common(sp)
    sp.add_argument("--base-n", type=int, required=True)
    sp.add_argument("--replicates", type=int, default=2)
    sp.add_argument("--second-order", action="store_true")
    sp.add_argument("--workers", type=int, default=0)
    sp.set_defaults(func=cmd_sobol)

    sp = sub.add_parser("pdp", help="PDP/ICE table for one swept dimension")
    common(sp)
    sp.add_argument("--sweep-dim", required=True)
    sp.add_argument("--grid-n", type=int, default=10)
    sp.add_argument("--density-levels", default="1e-4,1e-2")
    sp.add_argument("--background-n", type=int, default=8)
    sp.add_argument("--replicates", type=int, default=2)
    sp.add_argument("--workers", type=int, default=0)
    sp.set_defaults(func=cmd_pdp)

    sp = sub.add_parser("regret", help="one run with counterfactual regret instrumentation")
    common(sp)
    sp.add_argument("--every", type=int, default=1, help="evaluate regret every N steps")
    sp.add_argument("--window", type=int, default=50, help="rolling median window")
    sp.set_defaults(func=cmd_regret)

    sp = sub.add_parser("layout", help="emit the generated layout as JSON")
    common(sp)
    sp.set_defaults(func=cmd_layout)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
