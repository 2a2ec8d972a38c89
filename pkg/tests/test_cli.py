import csv
import json

import numpy as np
import pytest

from symbiosim.cli import (
    build_settings,
    expand_grid,
    main,
    parse_grid_spec,
    read_config_file,
)
from symbiosim.core import ConfigError


BASE_CFG = """\
# minimal scenario
c_d = 10.0
s = 2.0
rho = 0.001
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "base.cfg"
    path.write_text(BASE_CFG)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestConfigParsing:
    def test_round_trip(self, cfg):
        entries = read_config_file(cfg)
        params, run_opts = build_settings(entries)
        assert params.c_d == 10.0
        assert params.s == 2.0
        assert params.rho == 0.001
        assert run_opts == {
            "record_contracts": False,
            "regret_mode": "off",
            "snapshot_interval": 0,
        }

    def test_missing_required_field_named(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("s = 2.0\nrho = 0.001\n")
        with pytest.raises(ConfigError, match="c_d"):
            build_settings(read_config_file(path))

    def test_missing_field_exit_code_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("s = 2.0\nrho = 0.001\n")
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "c_d" in capsys.readouterr().err

    def test_bad_value_names_field(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("c_d = banana\ns = 2.0\nrho = 0.001\n")
        with pytest.raises(ConfigError, match="c_d"):
            build_settings(read_config_file(path))

    def test_bad_syntax_names_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("c_d = 1\nwhat is this\n")
        with pytest.raises(ConfigError, match=":2"):
            read_config_file(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("c_d = 1\ns = 1\nrho = 0.001\nbogus = 3\n")
        with pytest.raises(ConfigError, match="bogus"):
            build_settings(read_config_file(path))

    def test_pairs_and_run_fields(self, tmp_path):
        path = tmp_path / "full.cfg"
        path.write_text(
            "c_d = 10\ns = 1\nrho = 0.001\nbeta_range = 0.9, 1.1\n"
            "run.regret_mode = sampled:5\nrun.record_contracts = true\n"
        )
        params, run_opts = build_settings(read_config_file(path))
        assert params.beta_range == (0.9, 1.1)
        assert run_opts["regret_mode"] == "sampled:5"
        assert run_opts["record_contracts"] is True


class TestGridSpecs:
    def test_comma_list(self):
        assert parse_grid_spec("s=0.5,1,2") == ("s", [0.5, 1.0, 2.0])

    def test_range(self):
        name, values = parse_grid_spec("c_d=0:200:25")
        assert name == "c_d"
        assert values == [0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0]

    def test_figure_grid_cardinality(self):
        # the published sweep axes: 9 disposal costs x 3 scarcities x 3 densities
        names, cells = expand_grid(
            ["c_d=0:200:25", "s=0.5,1,2", "rho=1e-4,1e-3,1e-2"]
        )
        assert names == ["c_d", "s", "rho"]
        assert len(cells) == 9 * 3 * 3

    def test_bad_specs(self):
        with pytest.raises(ConfigError):
            parse_grid_spec("c_d")
        with pytest.raises(ConfigError):
            parse_grid_spec("c_d=1:0:1")
        with pytest.raises(ConfigError):
            expand_grid(["s=1", "s=2"])


class TestRunCommand:
    def test_override_horizon_row_count(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = main(
            ["run", "--config", str(cfg), "--out", str(out), "--override", "horizon=10"]
        )
        assert rc == 0
        rows = read_csv(out / "timeseries.csv")
        assert rows[0] == ["t", "mean_price", "si", "total_reward", "total_regret", "tau"]
        assert len(rows) == 11

    def test_contracts_and_snapshots_emitted(self, cfg, tmp_path):
        out = tmp_path / "out"
        rc = main(
            [
                "run", "--config", str(cfg), "--out", str(out),
                "--override", "horizon=6",
                "--override", "run.record_contracts=true",
                "--override", "run.snapshot_interval=2",
            ]
        )
        assert rc == 0
        contracts = [json.loads(l) for l in (out / "contracts.jsonl").read_text().splitlines()]
        assert contracts and {"t", "round", "buyer", "seller", "qty", "unit_price"} <= set(contracts[0])
        snaps = [json.loads(l) for l in (out / "snapshots.jsonl").read_text().splitlines()]
        assert [s["t"] for s in snaps] == [0, 2, 4]
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"timeseries.csv", "contracts.jsonl", "snapshots.jsonl"}

    def test_same_seed_identical_checksums(self, cfg, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(
                ["run", "--config", str(cfg), "--out", str(out), "--override", "horizon=15"]
            ) == 0
            outs.append(json.loads((out / "manifest.json").read_text())["files"])
        assert outs[0] == outs[1]

    def test_different_seed_changes_output(self, cfg, tmp_path):
        hashes = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}"
            main(
                ["run", "--config", str(cfg), "--out", str(out),
                 "--override", "horizon=15", "--override", f"seed={seed}"]
            )
            hashes.append(json.loads((out / "manifest.json").read_text())["files"]["timeseries.csv"])
        assert hashes[0] != hashes[1]


class TestSweepCommand:
    def test_single_cell_three_replicates(self, cfg, tmp_path):
        out = tmp_path / "sw"
        rc = main(
            [
                "sweep", "--config", str(cfg), "--out", str(out),
                "--grid", "c_d=10", "--replicates", "3", "--workers", "1",
                "--override", "horizon=10",
            ]
        )
        assert rc == 0
        rows = read_csv(out / "sweep.csv")
        assert rows[0] == ["c_d", "n", "price_mean", "price_std", "si_mean", "si_std"]
        assert len(rows) == 2
        assert rows[1][1] == "3"

    def test_worker_neutrality(self, cfg, tmp_path):
        texts = []
        for workers, name in ((1, "w1"), (2, "w2")):
            out = tmp_path / name
            rc = main(
                [
                    "sweep", "--config", str(cfg), "--out", str(out),
                    "--grid", "c_d=0,50", "--grid", "s=0.5,2",
                    "--replicates", "2", "--workers", str(workers),
                    "--override", "horizon=8",
                ]
            )
            assert rc == 0
            texts.append((out / "sweep.csv").read_text())
        assert texts[0] == texts[1]

    def test_failed_cell_recorded_and_nonzero_exit(self, cfg, tmp_path, capsys):
        out = tmp_path / "sw"
        rc = main(
            [
                "sweep", "--config", str(cfg), "--out", str(out),
                "--grid", "s=-1.0", "--replicates", "1", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        assert rc == 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["runs"][0]["status"] == "failed"
        assert "s" in manifest["runs"][0]["error"]

    def test_aggregate_recomputable_from_per_run_files(self, cfg, tmp_path):
        # sweep.csv must be a deterministic function of the per-run CSVs
        out = tmp_path / "sw"
        main(
            [
                "sweep", "--config", str(cfg), "--out", str(out),
                "--grid", "c_d=0,100", "--replicates", "2", "--workers", "1",
                "--override", "horizon=30",
            ]
        )
        agg = read_csv(out / "sweep.csv")[1:]
        for ci, row in enumerate(agg):
            prices, sis = [], []
            for rep in range(2):
                run_id = ci * 2 + rep
                rows = read_csv(out / "runs" / f"run_{run_id:05d}" / "timeseries.csv")[1:]
                window = rows[-100:]
                si_vals = [float(r[2]) for r in window]
                sis.append(np.mean(si_vals))
                num = sum(float(r[1]) * float(r[2]) for r in window if r[1] != "" and float(r[2]) > 0)
                den = sum(float(r[2]) for r in window if r[1] != "" and float(r[2]) > 0)
                prices.append(num / den if den > 0 else 100.0)
            assert float(row[2]) == pytest.approx(np.mean(prices), rel=1e-9)
            assert float(row[4]) == pytest.approx(np.mean(sis), rel=1e-9)

    def test_env_var_sets_default_workers(self, monkeypatch):
        from symbiosim.cli import default_workers

        monkeypatch.setenv("SYMBIOSIM_WORKERS", "3")
        assert default_workers() == 3

    def test_manifest_has_config_hash(self, cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out), "--override", "horizon=5"])
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["config_sha256"]) == 64

    def test_throughput_reported(self, cfg, tmp_path):
        out = tmp_path / "sw"
        main(
            [
                "sweep", "--config", str(cfg), "--out", str(out),
                "--grid", "c_d=10", "--replicates", "2", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["throughput_runs_per_min"] > 0
        assert len(manifest["timing"]["per_run_s"]) == 2


class TestSobolCommand:
    def test_smoke_design_row_count(self, cfg, tmp_path):
        out = tmp_path / "sb"
        rc = main(
            [
                "sobol", "--config", str(cfg), "--out", str(out),
                "--base-n", "8", "--replicates", "1", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        assert rc == 0
        design = read_csv(out / "sobol_design.csv")
        assert len(design) - 1 == 8 * 7
        outcomes = read_csv(out / "sobol_outcomes.csv")
        assert len(outcomes) - 1 == 8 * 7
        indices = read_csv(out / "sobol_indices.csv")
        # 2 outputs x (5 S1 + 5 ST)
        assert len(indices) - 1 == 2 * 10

    def test_manifest_records_budgets(self, cfg, tmp_path):
        out = tmp_path / "sb"
        main(
            [
                "sobol", "--config", str(cfg), "--out", str(out),
                "--base-n", "4", "--replicates", "1", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["base_n"] == 4
        assert manifest["n_evaluations"] == 28
        assert len(manifest["space"]) == 5


class TestPdpCommand:
    def test_row_cardinality(self, cfg, tmp_path):
        out = tmp_path / "pd"
        rc = main(
            [
                "pdp", "--config", str(cfg), "--out", str(out),
                "--sweep-dim", "c_d", "--grid-n", "5",
                "--density-levels", "1e-4,1e-2", "--background-n", "3",
                "--replicates", "1", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        assert rc == 0
        rows = read_csv(out / "pdp_ice.csv")
        assert rows[0] == ["density", "line_id", "sweep_dim", "sweep_value", "si", "price"]
        assert len(rows) - 1 == 2 * (3 + 1) * 5

    def test_pdp_rows_are_mean_of_ice_rows(self, cfg, tmp_path):
        out = tmp_path / "pd"
        main(
            [
                "pdp", "--config", str(cfg), "--out", str(out),
                "--sweep-dim", "c_t", "--grid-n", "3",
                "--density-levels", "1e-3", "--background-n", "4",
                "--replicates", "1", "--workers", "1",
                "--override", "horizon=5",
            ]
        )
        rows = read_csv(out / "pdp_ice.csv")[1:]
        ice = {}
        pdp = {}
        for density, line_id, _dim, x, si, price in rows:
            key = (density, x)
            if line_id == "pdp":
                pdp[key] = (float(si), float(price))
            else:
                ice.setdefault(key, []).append((float(si), float(price)))
        for key, mean_vals in pdp.items():
            sis = np.array([v[0] for v in ice[key]])
            prices = np.array([v[1] for v in ice[key]])
            assert mean_vals[0] == sis.mean()
            assert mean_vals[1] == prices.mean()


class TestRegretCommand:
    def test_csv_schema_and_rolling_median(self, cfg, tmp_path):
        out = tmp_path / "rg"
        rc = main(
            [
                "regret", "--config", str(cfg), "--out", str(out),
                "--every", "1", "--window", "3",
                "--override", "horizon=6", "--override", "K=4",
                "--override", "n_firms=8",
            ]
        )
        assert rc == 0
        rows = read_csv(out / "regret.csv")
        assert rows[0][0] == "t"
        assert rows[0][-3:] == ["total_regret", "mean_regret", "rolling_median_total"]
        assert len(rows) == 7
        totals = [float(r[-3]) for r in rows[1:]]
        medians = [float(r[-1]) for r in rows[1:]]
        assert medians[0] == totals[0]
        assert medians[2] == sorted(totals[:3])[1]


class TestLayoutCommand:
    def test_layout_json(self, cfg, tmp_path):
        out = tmp_path / "ly"
        rc = main(["layout", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        doc = json.loads((out / "layout.json").read_text())
        assert doc["width"] == pytest.approx(200.0)
        assert len(doc["buyers"]) == 20
        assert len(doc["sellers"]) == 20
        assert doc["seed"] == 0
        assert all(b["q_need"] > 0 for b in doc["buyers"])
