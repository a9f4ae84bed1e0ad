import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from rydpulse.cli import (EXIT_CONFIG, EXIT_NO_SOLUTION, EXIT_OK, EXIT_SIMULATION,
                          EXIT_VERIFY_FAILED, main)
from rydpulse.dynamics import SimulationError
from rydpulse.pulse import save_pulse, zero_pulse
from rydpulse.tables import load_table


def write(path, text):
    path.write_text(textwrap.dedent(text))
    return path


@pytest.fixture
def cz_config(tmp_path):
    save_pulse(load_table("I")[0].pulse, tmp_path / "cz.toml")
    return write(tmp_path / "run.toml", """
        [geometry]
        kind = "perfect"
        n_atoms = 2
        [pulse]
        file = "cz.toml"
        [target]
        name = "CZ"
    """)


def test_evaluate_table_I(cz_config, tmp_path, capsys):
    out = tmp_path / "rec.json"
    assert main(["evaluate", str(cz_config), "--out", str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(out.read_text())
    assert printed["record"]["infidelity"] <= 1e-8
    assert len(printed["config_hash"]) == 16


def test_evaluate_zero_pulse_identity(tmp_path, capsys):
    save_pulse(zero_pulse(duration=0.0), tmp_path / "z.toml")
    cfg = write(tmp_path / "z_run.toml", """
        [geometry]
        kind = "perfect"
        n_atoms = 3
        [pulse]
        file = "z.toml"
        [target]
        name = "identity3"
    """)
    assert main(["evaluate", str(cfg)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["record"]["fidelity"] == 1.0


def test_evaluate_trajectory_export(cz_config, tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    assert main(["evaluate", str(cz_config), "--trajectory", str(traj), "--samples", "5"]) == 0
    assert traj.read_text().startswith("omega0_t,block,rydberg_population,norm\n")


def test_missing_and_malformed_config(tmp_path, capsys):
    assert main(["evaluate", str(tmp_path / "absent.toml")]) == EXIT_CONFIG
    bad = write(tmp_path / "bad.toml", "[geometry\n")
    assert main(["evaluate", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_target_name_in_optimize(tmp_path):
    cfg = write(tmp_path / "t.toml", '[target]\nname = "XYZ"\n')
    assert main(["optimize", str(cfg)]) == EXIT_CONFIG


def test_simulation_error_exit_code(cz_config, monkeypatch):
    def boom(*a, **k):
        raise SimulationError("integrator exceeded")

    monkeypatch.setattr("rydpulse.cli.evaluate", boom)
    assert main(["evaluate", str(cz_config)]) == EXIT_SIMULATION


def optimize_config(tmp_path, restarts=1, extra=""):
    return write(tmp_path / "opt.toml", f"""
        [geometry]
        kind = "perfect"
        n_atoms = 2
        [ansatz]
        ansatz = "antisymmetric"
        k = 1
        [target]
        name = "CZ"
        [optimizer]
        mode = "time"
        restarts = {restarts}
        {extra}
    """)


def test_optimize_is_reproducible_and_writes_results(tmp_path, capsys):
    cfg = optimize_config(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["optimize", str(cfg), "--out", str(a), "--seed", "3",
                 "--pulse-out", str(tmp_path / "best.toml")]) == EXIT_OK
    assert main(["optimize", str(cfg), "--out", str(b), "--seed", "3"]) == EXIT_OK
    assert a.read_text() == b.read_text()
    doc = json.loads(a.read_text())
    assert doc["restarts"][0]["seed"] == 3
    assert doc["config"]["optimizer"]["seed"] == 3
    assert doc["best"]["params"]["ansatz"] == "antisymmetric"
    assert (tmp_path / "best.toml").exists()


def test_optimize_no_solution_exit(tmp_path):
    cfg = optimize_config(tmp_path, extra="max_iters = 1\nhandoff_iters = 1")
    assert main(["optimize", str(cfg)]) == EXIT_NO_SOLUTION


def test_optimize_warm_start_from_pulse_file(cz_config, capsys):
    assert main(["optimize", str(cz_config)]) == EXIT_OK
    best = json.loads(capsys.readouterr().out)["best"]
    assert abs(best["params"]["omega0_T"] - 7.61140652) < 1e-3


def test_verify_tables(capsys, tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify-tables", "I", "III", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.count("PASS") == 6 and "FAIL" not in text
    assert json.loads(out.read_text())["passed"] is True
    assert main(["verify-tables", "VII"]) == EXIT_CONFIG


def test_verify_tables_failure_exit(monkeypatch, capsys):
    monkeypatch.setattr("rydpulse.tables.RYDBERG_TIME_TOL", -1.0)
    assert main(["verify-tables", "I"]) == EXIT_VERIFY_FAILED


def test_profile(tmp_path):
    save_pulse(load_table("I")[0].pulse, tmp_path / "cz.toml")
    out = tmp_path / "prof.csv"
    assert main(["profile", str(tmp_path / "cz.toml"), "--samples", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "omega0_t,xi,dxi_dt" and len(lines) == 3
    assert main(["profile", str(tmp_path / "none.toml"), "--out", str(out)]) == EXIT_CONFIG


def test_scan_distance_pairs_and_resume(tmp_path, capsys):
    save_pulse(load_table("II")[3].pulse, tmp_path / "p.toml")
    cfg = write(tmp_path / "s.toml", """
        [geometry]
        kind = "isosceles"
        v_nn = 32.0
        v_nnn = 32.0
        [pulse]
        file = "p.toml"
        [target]
        name = "CCZbar"
        [objective]
        gamma = 1e-4
        [scan]
        deltas = [0.0, 0.01]
        pairs = [[0, 1], [0, 2]]
    """)
    out = tmp_path / "d.csv"
    assert main(["scan-distance", str(cfg), "--out", str(out)]) == EXIT_OK
    for name in ("d_pair01.csv", "d_pair02.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[0] == "delta_d,infidelity" and len(lines) == 3
    assert main(["scan-distance", str(cfg), "--out", str(out)]) == EXIT_OK
    assert len((tmp_path / "d_pair01.csv").read_text().splitlines()) == 3
    # a different config cannot silently append to the same table
    assert main(["scan-distance", str(cfg), "--out", str(out), "--seed", "9"]) == EXIT_CONFIG
    assert main(["scan-distance", str(cfg), "--out", str(out), "--seed", "9", "--fresh"]) == 0


def test_scan_distance_needs_positions(cz_config, tmp_path):
    assert main(["scan-distance", str(cz_config), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_scan_params(tmp_path, capsys):
    cfg = optimize_config(tmp_path, extra="\n[scan]\nk_list = [1]\nrestarts = 2")
    out = tmp_path / "p.csv"
    assert main(["scan-params", str(cfg), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "ansatz,K,param_count,best_T,best_TR,best_infid"
    assert lines[1].startswith("antisymmetric,1,4,")


def test_scan_params_mode_required(cz_config, tmp_path):
    assert main(["scan-params", str(cz_config), "--out", str(tmp_path / "p.csv")]) == EXIT_CONFIG


def test_scan_geometry_needs_isosceles(cz_config, tmp_path):
    assert main(["scan-geometry", str(cz_config), "--out", str(tmp_path / "g.csv")]) == EXIT_CONFIG


def test_jobs_default_from_environment(monkeypatch):
    from rydpulse.cli import build_parser

    monkeypatch.setenv("RYDPULSE_JOBS", "5")
    args = build_parser().parse_args(["verify-tables"])
    assert args.jobs == 5


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rydpulse.cli", "verify-tables", "I"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("PASS") == 2
