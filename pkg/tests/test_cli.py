import json
from pathlib import Path

import numpy as np
import pytest

from dnl.cli import main
from dnl.config import ConfigError, load_config

BASE_SIMULATE = """
[experiment]
kind = simulate

[grid]
n = 31
domain = 0 1
bc = dirichlet

[potential]
kind = quadratic

[alpha]
kind = linear
sigma = 1.0

[source]
value = 0.0

[time]
dt = 1e-3
t_end = 0.05

[init]
profile = zero

[output]
dir = {out}
"""

SMOOTHING = """
[experiment]
kind = smoothing
seeds = 3
fit_lo = 0.001
fit_hi = 0.03

[grid]
n = 63

[potential]
kind = quadratic

[alpha]
kind = linear

[time]
dt = 5e-4
t_end = 0.3
newton_tol = 1e-12

[init]
profile = random
amp = 0.5
seed = 0

[output]
dir = {out}
"""

EXPECTED_HEADER = "t,E,F,G,ut_Linf,u_min,u_max,d2,dinf,newton_iters,dissipation"


def write_cfg(tmp_path: Path, body: str, name="exp.ini", out="run") -> Path:
    p = tmp_path / name
    p.write_text(body.format(out=tmp_path / out), encoding="utf-8")
    return p


class TestConfig:
    def test_load_and_defaults(self, tmp_path):
        p = write_cfg(tmp_path, BASE_SIMULATE)
        cfg = load_config(p)
        assert cfg.experiment == "simulate"
        assert cfg.grid_n == 31
        assert cfg.dt == 1e-3
        assert cfg.record_every == 1

    def test_bad_experiment_kind(self, tmp_path):
        bad = BASE_SIMULATE.replace("kind = simulate", "kind = nonsense", 1)
        p = write_cfg(tmp_path, bad)
        with pytest.raises(ConfigError):
            load_config(p)

    def test_bad_number(self, tmp_path):
        bad = BASE_SIMULATE.replace("dt = 1e-3", "dt = fast")
        p = write_cfg(tmp_path, bad)
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 2


class TestRun:
    def test_zero_run_writes_artifacts_and_zero_energy(self, tmp_path):
        p = write_cfg(tmp_path, BASE_SIMULATE)
        assert main(["run", "--config", str(p)]) == 0
        out = tmp_path / "run"
        csv = (out / "trajectory.csv").read_text().splitlines()
        assert csv[0] == EXPECTED_HEADER
        g_col = [float(line.split(",")[3]) for line in csv[1:]]
        assert all(g == 0.0 for g in g_col)
        assert (out / "report.json").exists()
        snapshots = sorted((out / "fields").glob("state_*.txt"))
        assert len(snapshots) == len(csv) - 1
        x, u = np.loadtxt(snapshots[0]).T
        assert len(x) == 31 and np.all(u == 0.0)

    def test_byte_identical_reruns(self, tmp_path):
        p1 = write_cfg(tmp_path, SMOOTHING, name="a.ini", out="run_a")
        p2 = write_cfg(tmp_path, SMOOTHING, name="b.ini", out="run_b")
        assert main(["run", "--config", str(p1)]) == 0
        assert main(["run", "--config", str(p2)]) == 0
        csv_a = (tmp_path / "run_a" / "trajectory.csv").read_bytes()
        csv_b = (tmp_path / "run_b" / "trajectory.csv").read_bytes()
        assert csv_a == csv_b
        rep_a = (tmp_path / "run_a" / "report.json").read_bytes()
        rep_b = (tmp_path / "run_b" / "report.json").read_bytes()
        assert rep_a == rep_b

    def test_smoothing_report_contents(self, tmp_path):
        p = write_cfg(tmp_path, SMOOTHING)
        assert main(["run", "--config", str(p)]) == 0
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        assert report["bound_ok"] is True
        assert report["c2"] > 0.0
        assert report["fitted"] is True
        assert len(report["c2_per_seed"]) == 3

    def test_out_flag_overrides_dir(self, tmp_path):
        p = write_cfg(tmp_path, BASE_SIMULATE)
        target = tmp_path / "elsewhere"
        assert main(["run", "--config", str(p), "--out", str(target)]) == 0
        assert (target / "trajectory.csv").exists()

    def test_solver_failure_exit_code(self, tmp_path):
        body = BASE_SIMULATE.replace("kind = quadratic", "kind = double_well")
        body = body.replace("profile = zero", "profile = sine\namp = 0.9")
        body = body.replace(
            "dt = 1e-3", "dt = 1e-3\nnewton_tol = 1e-15\nnewton_max_iters = 1"
        )
        p = write_cfg(tmp_path, body)
        assert main(["run", "--config", str(p)]) == 3
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        assert report["solver_failure"] is True

    def test_dt_safeguard_is_config_error(self, tmp_path):
        body = BASE_SIMULATE.replace("kind = quadratic", "kind = double_well")
        body = body.replace("dt = 1e-3", "dt = 0.9")
        p = write_cfg(tmp_path, body)
        assert main(["run", "--config", str(p)]) == 2


class TestSweep:
    def test_single_child_matches_report(self, tmp_path):
        child = write_cfg(tmp_path, BASE_SIMULATE, name="child.ini", out="solo")
        sweep = tmp_path / "sweep.ini"
        sweep.write_text("[sweep]\nconfigs = child.ini\n", encoding="utf-8")
        out = tmp_path / "fam"
        assert main(["sweep", "--config", str(sweep), "--out", str(out)]) == 0
        agg = json.loads((out / "sweep.json").read_text())
        assert agg["n_children"] == 1 and agg["n_pass"] == 1
        child_report = json.loads((out / "child_000" / "report.json").read_text())
        assert agg["children"][0]["report"] == child_report

    def test_seed_variation(self, tmp_path):
        base = write_cfg(tmp_path, SMOOTHING, name="vary.ini")
        with open(base, "a", encoding="utf-8") as fh:
            fh.write("\n[sweep]\nvary = init.seed\nvalues = 0 1\n")
        out = tmp_path / "fam"
        assert main(["sweep", "--config", str(base), "--out", str(out)]) == 0
        agg = json.loads((out / "sweep.json").read_text())
        assert agg["n_children"] == 2 and agg["n_pass"] == 2
        c0 = json.loads((out / "child_000" / "report.json").read_text())
        c1 = json.loads((out / "child_001" / "report.json").read_text())
        assert c0["c2"] != c1["c2"]  # different seeds, different data

    def test_invalid_child_isolated(self, tmp_path):
        good = write_cfg(tmp_path, BASE_SIMULATE, name="good.ini", out="g")
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nkind = nonsense\n", encoding="utf-8")
        sweep = tmp_path / "sweep.ini"
        sweep.write_text("[sweep]\nconfigs = bad.ini good.ini\n", encoding="utf-8")
        out = tmp_path / "fam"
        status = main(["sweep", "--config", str(sweep), "--out", str(out)])
        assert status == 2  # worst child status
        agg = json.loads((out / "sweep.json").read_text())
        assert agg["n_children"] == 2
        assert agg["n_pass"] == 1
        assert any("error" in e for e in agg["children"])
