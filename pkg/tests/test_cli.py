"""End-to-end CLI behavior: artifacts, exit codes, determinism."""
from __future__ import annotations

import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from strauss_lab.cli import main
from strauss_lab.sweep import write_csv

P_STRAUSS3 = "2.414213562373095"


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def crit_solution_csv(tmp_path_factory, strauss_crit_samples):
    """The Strauss-critical blow-up run, thinned and stored as a solve CSV."""
    s = strauss_crit_samples
    t, r = s.t[::2], s.r[::2]
    u, ut = s.u[::2, ::2], s.ut[::2, ::2]
    rows = []
    for i in range(t.size):
        for j in range(r.size):
            rows.append((t[i], r[j], u[i, j], ut[i, j]))
    path = tmp_path_factory.mktemp("sol") / "crit.csv"
    write_csv(str(path), ("t", "r", "u", "ut"), rows)
    return str(path)


# --- exponents ---------------------------------------------------------------

def test_exponents_cmd(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    assert main(["exponents", "--n", "3", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "p_strauss" in text and "bound" in text
    (row,) = _read_rows(out)
    assert float(row["pS"]) == pytest.approx(1.0 + math.sqrt(2.0), abs=1e-12)
    assert float(row["gamma"]) == pytest.approx(2.0)  # p = 2 default
    assert row["bound_kind"] == "polynomial"
    assert float(row["bound_exponent"]) == pytest.approx(2.0)


def test_exponents_mode_flag(capsys):
    assert main(["exponents", "--n", "3", "--p", "2.0", "--mode", "ut"]) == 0
    text = capsys.readouterr().out
    assert "exponential" in text  # Glassey-critical in ut mode


# --- solve ---------------------------------------------------------------------

def test_solve_blowup_artifacts(tmp_path, capsys):
    out = tmp_path / "sol.csv"
    summary = tmp_path / "sum.csv"
    rc = main(["solve", "--mu", "0", "--p", "2.2", "--eps", "1.0",
               "--f-amp", "20", "--g-amp", "20", "--t-max", "6",
               "--dr", "0.04", "--out", str(out), "--summary", str(summary)])
    assert rc == 0
    assert "status=blew_up" in capsys.readouterr().out
    (row,) = _read_rows(summary)
    assert row["status"] == "blew_up"
    assert float(row["t_end"]) < 6.0
    data = np.loadtxt(out, delimiter=",", skiprows=1, ndmin=2)
    assert data.shape[1] == 4
    assert data.shape[0] > 0


def test_solve_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("t_max = 99\ndr = 0.1\nmu = 0.0\nnonlinearity = none\n"
                   "f_amp = 0.1\ng_amp = 0.1\n# comment line\n")
    summary = tmp_path / "sum.csv"
    rc = main(["solve", "--config", str(cfg), "--t-max", "4",
               "--summary", str(summary)])
    assert rc == 0
    assert "status=completed" in capsys.readouterr().out
    (row,) = _read_rows(summary)
    assert float(row["t_end"]) == pytest.approx(4.0, abs=0.1)


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus_key = 1\n")
    assert main(["solve", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 2


# --- lifespan / sweep / fit -------------------------------------------------------

def test_lifespan_cmd(tmp_path, capsys):
    out = tmp_path / "life.csv"
    rc = main(["lifespan", "--mu", "0", "--p", "2.2", "--eps", "1.0",
               "--f-amp", "20", "--g-amp", "20", "--t-max", "6",
               "--dr", "0.04", "--out", str(out)])
    assert rc == 0
    (row,) = _read_rows(out)
    assert row["censored"] == "false"
    assert 0.0 < float(row["T"]) < 6.0
    assert "T_levels" in capsys.readouterr().out


def test_sweep_csv_worker_invariant(tmp_path, capsys):
    args = ["sweep", "--mu", "0", "--p", "2.2", "--f-amp", "20",
            "--g-amp", "20", "--t-max", "8", "--dr", "0.04",
            "--eps-min", "0.5", "--eps-max", "1.0", "--eps-count", "4",
            "--tolerance", "99"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rc1 = main(args + ["--jobs", "1", "--out", str(a)])
    rc2 = main(args + ["--jobs", "2", "--out", str(b)])
    capsys.readouterr()
    assert rc1 == rc2
    assert a.read_bytes() == b.read_bytes()
    rows = _read_rows(a)
    assert len(rows) == 4
    assert all(row["censored"] == "false" for row in rows)


def test_sweep_critical_bound_refusal(tmp_path, capsys):
    out = tmp_path / "crit.csv"
    rc = main(["sweep", "--mu", "0", "--p", P_STRAUSS3, "--f-amp", "20",
               "--g-amp", "20", "--t-max", "8", "--dr", "0.04",
               "--eps-min", "0.5", "--eps-max", "1.0", "--eps-count", "4",
               "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "not applicable" in text and "odelemma" in text
    assert len(_read_rows(out)) == 4  # table still written


def test_fit_synthetic_roundtrip(tmp_path, capsys):
    sweep = tmp_path / "sweep.csv"
    eps = np.geomspace(0.2, 1.0, 6)
    rows = [(e, 3.0 * e**-2.0, 0.01, False, False) for e in eps]
    rows.append((0.15, float("nan"), 0.0, True, False))  # censored extra
    write_csv(str(sweep), ("eps", "T", "uncertainty", "censored",
                           "unreliable"), rows)
    out = tmp_path / "fit.csv"
    plot = tmp_path / "fit.svg"
    rc = main(["fit", "--in", str(sweep), "--theory-exponent", "2.0",
               "--tolerance", "1e-6", "--out", str(out), "--plot", str(plot)])
    assert rc == 0
    (row,) = _read_rows(out)
    assert float(row["slope"]) == pytest.approx(2.0, abs=1e-12)
    assert row["verdict"] == "consistent"
    assert plot.read_text().count("<circle") == 6
    capsys.readouterr()
    # injected failure: wrong theory exponent
    assert main(["fit", "--in", str(sweep), "--theory-exponent", "3.0"]) == 1
    capsys.readouterr()


def test_fit_error_paths(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("eps,uncertainty\n0.5,0.1\n")
    assert main(["fit", "--in", str(bad)]) == 2  # missing T column
    good = tmp_path / "good.csv"
    eps = np.geomspace(0.2, 1.0, 5)
    write_csv(str(good), ("eps", "T", "uncertainty", "censored", "unreliable"),
              [(e, 2.0 * e**-2.0, 0.0, False, False) for e in eps])
    # critical config without an explicit exponent: declines to fit
    rc = main(["fit", "--in", str(good), "--p", P_STRAUSS3])
    assert rc == 0
    text = capsys.readouterr().out
    assert "not applicable" in text


# --- eigen -----------------------------------------------------------------------

def test_eigen_cmd(tmp_path, capsys):
    out = tmp_path / "eig.csv"
    rc = main(["eigen", "--mu", "1.0", "--beta", "2.5",
               "--etas", "1.0,2.0", "--r-max", "40", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.count("lambda=") == 2
    rows = _read_rows(out)
    assert set(rows[0]) == {"eta", "r", "psi", "w", "lambda"}
    assert len({row["eta"] for row in rows}) == 2


def test_eigen_guards_exit_2(capsys):
    assert main(["eigen", "--etas", "-1.0"]) == 2
    assert main(["eigen", "--etas", "20.0", "--r-max", "40"]) == 2
    assert main(["eigen", "--etas", "0.2", "--r-max", "40"]) == 2  # too short
    capsys.readouterr()


# --- bq ---------------------------------------------------------------------------

def test_bq_cmd(tmp_path, capsys):
    out = tmp_path / "bq.csv"
    rc = main(["bq", "--q", "1.0", "--t-max", "6", "--dr", "0.05",
               "--dt", "0.05", "--nodes", "48", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.count(": max residual") == 4
    assert "FAIL" not in text
    data = np.loadtxt(out, delimiter=",", skiprows=1, ndmin=2)
    assert data.shape[1] == 3
    assert np.all(data[:, 2] > 0.0)


def test_bq_threshold_failure(capsys):
    rc = main(["bq", "--q", "1.0", "--t-max", "4", "--dr", "0.1",
               "--dt", "0.1", "--nodes", "32", "--threshold", "1e-9"])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


# --- verify -----------------------------------------------------------------------

VERIFY_FLAGS = ["--mu", "1.0", "--beta", "2.5", "--p", P_STRAUSS3,
                "--eps", "1.0", "--f-amp", "6.8", "--g-amp", "6.8"]


def test_verify_all_checks(crit_solution_csv, tmp_path, capsys):
    out = tmp_path / "checks.csv"
    rc = main(["verify", "--solution", crit_solution_csv, *VERIFY_FLAGS,
               "--points", "8", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "check 5.11: skipped" in text
    assert "all checks passed" in text
    assert text.count(": pass") == 5
    rows = _read_rows(out)
    assert {row["check"] for row in rows} == {"3.4", "3.16", "4.9", "4.15",
                                              "5.1"}
    sign_rows = [row for row in rows if row["check"] == "5.1"]
    assert all(row["ratio"] == "NaN" for row in sign_rows)


def test_verify_tight_tolerance_fails(crit_solution_csv, capsys):
    rc = main(["verify", "--solution", crit_solution_csv, *VERIFY_FLAGS,
               "--checks", "3.16", "--points", "8",
               "--spread-tol", "1.000001"])
    assert rc == 1
    assert "FAILED checks: 3.16" in capsys.readouterr().out


def test_verify_unknown_check(crit_solution_csv, capsys):
    rc = main(["verify", "--solution", crit_solution_csv, "--checks", "9.9"])
    assert rc == 2
    assert "unknown check" in capsys.readouterr().err


def test_verify_malformed_solution(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,r,u\n0.0,0.0,1.0\n")
    assert main(["verify", "--solution", str(bad), "--checks", "5.1"]) == 2
    capsys.readouterr()


# --- odelemma ---------------------------------------------------------------------

def test_odelemma_cmd(tmp_path, capsys):
    out = tmp_path / "ode.csv"
    rc = main(["odelemma", "--p1", "2.0", "--p2", "2.0",
               "--delta-count", "6", "--out", str(out)])
    assert rc == 0
    assert "fitted slope" in capsys.readouterr().out
    rows = _read_rows(out)
    assert len(rows) == 6
    assert all(math.isfinite(float(row["loglogT"])) for row in rows)


def test_odelemma_tight_tolerance(capsys):
    rc = main(["odelemma", "--p1", "2.0", "--p2", "2.0",
               "--delta-count", "6", "--tol", "1e-9"])
    assert rc == 1
    capsys.readouterr()


# --- console entry -----------------------------------------------------------------

def test_module_entrypoint_subprocess():
    proc = subprocess.run([sys.executable, "-m", "strauss_lab.cli",
                           "exponents", "--n", "4"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "p_strauss" in proc.stdout
