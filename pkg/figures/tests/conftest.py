"""Fixture data produced by driving the simulator CLI, as a consumer would."""

import subprocess
import sys

import pytest

BASE_CFG = "c_d = 10.0\ns = 2.0\nrho = 0.001\n"


def run_cli(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", "symbiosim.cli", *argv],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def sim_outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    cfg = root / "base.cfg"
    cfg.write_text(BASE_CFG)

    run_cli("run", "--config", str(cfg), "--out", str(root / "run"),
            "--override", "horizon=60")
    run_cli("regret", "--config", str(cfg), "--out", str(root / "regret"),
            "--every", "1", "--override", "horizon=40",
            "--override", "K=5", "--override", "n_firms=8")
    run_cli("sweep", "--config", str(cfg), "--out", str(root / "sweep"),
            "--grid", "c_d=0,100", "--grid", "s=0.5,2", "--replicates", "2",
            "--workers", "1", "--override", "horizon=15")
    run_cli("layout", "--config", str(cfg), "--out", str(root / "layout"))
    run_cli("pdp", "--config", str(cfg), "--out", str(root / "pdp"),
            "--sweep-dim", "c_d", "--grid-n", "4", "--density-levels", "1e-4,1e-2",
            "--background-n", "3", "--replicates", "1", "--workers", "1",
            "--override", "horizon=10")

    return {
        "timeseries": root / "run" / "timeseries.csv",
        "regret": root / "regret" / "regret.csv",
        "sweep": root / "sweep" / "sweep.csv",
        "layout": root / "layout" / "layout.json",
        "pdp_ice": root / "pdp" / "pdp_ice.csv",
    }
