import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nschemo.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, main
from nschemo.fieldio import read_snapshot, write_snapshot
from nschemo.grid import Grid, ScalarField

ZERO_CFG = """
[grid]
nx = 8
ny = 8
[physics]
B = 0.01
[initial]
phi = constant 0.0
[stepper]
dt = 0.001
n_steps = 4
[output]
cadence = 2
formats = binary ppm
"""


def test_help_lists_commands():
    out = subprocess.run([sys.executable, "-m", "nschemo.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("run", "verify", "elliptic-solve", "convergence"):
        assert cmd in out.stdout


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_run_zero_state_constant_rows(tmp_path):
    cfg = tmp_path / "zero.ini"
    cfg.write_text(ZERO_CFG)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "diagnostics.csv")))
    assert len(rows) == 5
    for key in ("E", "D", "phi_mean", "sigma_mean", "margin", "energy_residual"):
        assert len({r[key] for r in rows}) == 1, key
    assert (out / "config.effective.ini").exists()
    assert (out / "snapshots" / "phi_000002.snap").exists()
    assert (out / "snapshots" / "phi_final.ppm").exists()


def test_run_uses_env_directory(tmp_path, monkeypatch):
    cfg = tmp_path / "zero.ini"
    cfg.write_text(ZERO_CFG)
    monkeypatch.setenv("NSCHEMO_OUT", str(tmp_path / "envout"))
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "envout" / "diagnostics.csv").exists()


def test_run_twice_identical_csv(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[grid]\nnx = 8\nny = 8\n[physics]\nB = 0.01\nchi = 0.5\n[stepper]\ndt = 0.001\nn_steps = 3\n")
    for name in ("a", "b"):
        assert main(["--seed", "11", "run", "--config", str(cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[physics]\nc0 = 1.5\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "(H5)" in capsys.readouterr().err


def test_solver_abort_exit_code(tmp_path):
    cfg = tmp_path / "abort.ini"
    cfg.write_text(
        "[grid]\nnx = 8\nny = 8\n[initial]\namplitude = 0.9\n"
        "[stepper]\ndt = 1.0\nnewton_max = 1\nnewton_tol = 1e-14\nn_steps = 2\n"
    )
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_ABORT
    dump = json.loads((tmp_path / "o" / "abort.txt").read_text())
    assert "message" in dump


def test_unknown_experiment(tmp_path):
    assert main(["verify", "nonsense", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_elliptic_solve(tmp_path):
    g = Grid(8, 8)
    f = write_snapshot(tmp_path / "f.snap", ScalarField.constant(g, math.log(3.0), "f"))
    out = tmp_path / "ell"
    code = main(["elliptic-solve", "--f", str(f), "--A", "1", "--B", "1", "--theta", "1", "--theta0", "1.5", "--out", str(out)])
    assert code == EXIT_OK
    u, _ = read_snapshot(out / "u.snap")
    assert np.max(np.abs(u.values - 0.8)) < 1e-9
    rep = json.loads((out / "elliptic_report.txt").read_text())
    assert rep["converged"] and rep["margin"] == pytest.approx(0.2, abs=1e-9)


def test_elliptic_solve_bad_inputs(tmp_path):
    assert main(["elliptic-solve", "--f", str(tmp_path / "missing.snap")]) == EXIT_CONFIG
    g = Grid(8, 8)
    f = write_snapshot(tmp_path / "f.snap", ScalarField.zeros(g, "f"))
    assert main(["elliptic-solve", "--f", str(f), "--A", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_convergence_command(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(
        "[grid]\nnx = 8\nny = 8\n[physics]\nB = 0.01\n[initial]\nphi = stripe\namplitude = 0.5\nwidth = 0.1\n"
        "[stepper]\ndt = 0.004\nt_end = 0.004\n"
    )
    assert main(["convergence", "--config", str(cfg), "--levels", "3", "--out", str(tmp_path / "cv")]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "cv" / "convergence.csv")))
    assert [int(r["nx"]) for r in rows] == [8, 16, 32]
    assert float(rows[1]["order"]) > 1.0
    assert main(["convergence", "--config", str(cfg), "--levels", "1"]) == EXIT_CONFIG


def test_verify_single_experiment(tmp_path, capsys):
    assert main(["verify", "elliptic", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("verify: PASS")
    for name in ("report.txt", "checks.csv"):
        assert (tmp_path / "elliptic" / name).exists()
    assert (tmp_path / "summary.csv").read_text().startswith("experiment,check,measured")
