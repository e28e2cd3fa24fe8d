import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nmo import cli
from nmo.data import read_dataset, write_dataset
from nmo.estimation import FitResult, fit_mle
from nmo.model import BnmoParams
from nmo.multivariate import MnmoParams, save_params
from nmo.sampler import make_rng, sample_dataset


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_scatter_inputs(tmp_path):
    for t12 in (1.5, 3, 7):
        out = tmp_path / f"scatter_{t12}.csv"
        rc = cli.main(["simulate", "--theta1", "1", "--theta2", "1", "--theta12", str(t12),
                       "--m", "750", "--seed", "1", "--out", str(out)])
        assert rc == 0
        d = read_dataset(out)
        assert d.m == 750 and d.has_flags


def test_simulate_is_byte_identical_under_seed(tmp_path):
    args = ["simulate", "--theta1", "1", "--theta2", "3", "--theta12", "0.8", "--m", "100",
            "--seed", "9", "--out"]
    assert cli.main(args + [str(tmp_path / "a.csv")]) == 0
    assert cli.main(args + [str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_usage_errors(tmp_path):
    out = str(tmp_path / "x.csv")
    base = ["simulate", "--theta1", "1", "--theta2", "1", "--theta12", "1", "--out", out]
    assert cli.main(base + ["--m", "0"]) == cli.EXIT_USAGE
    assert cli.main(base + ["--m", "5", "--bogus"]) == cli.EXIT_USAGE
    assert cli.main(["simulate", "--theta1", "1", "--m", "5", "--out", out]) == cli.EXIT_USAGE
    assert cli.main(base[:2] + ["-1", "--theta2", "1", "--theta12", "1", "--m", "5",
                                "--out", out]) == cli.EXIT_USAGE
    assert cli.main(base + ["--m", "5", "--out", str(tmp_path / "no" / "dir.csv")]) == cli.EXIT_IO


def test_simulate_multivariate(tmp_path):
    params = tmp_path / "p.json"
    save_params(params, MnmoParams.from_lists([1, 1, 1], [1, 1, 1]))
    out = tmp_path / "m.csv"
    assert cli.main(["simulate", "--params", str(params), "--m", "50", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 50 and set(rows[0]) == {"r", "s", "x3", "is_singular"}


def test_fit_command(tmp_path, capsys):
    data = tmp_path / "d.csv"
    write_dataset(data, sample_dataset(BnmoParams(1, 3, 0.8), -1, 2000, make_rng(2)))
    out = tmp_path / "fit.json"
    assert cli.main(["fit", "--in", str(data), "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    est = np.array([res["theta1"], res["theta2"], res["theta12"]])
    assert np.all(np.abs(est - [1, 3, 0.8]) < 0.15)
    for key in ("log_likelihood", "m1", "m2", "converged", "score_norm", "theta12_upper_bound"):
        assert key in res
    summary = capsys.readouterr().out
    assert "theta12" in summary and "m2=" in summary


def test_fit_reports_bad_rows(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("r,s\n1,2\n0.5,-3\n2,1\n")
    assert cli.main(["fit", "--in", str(data)]) == cli.EXIT_IO
    err = capsys.readouterr().err
    assert "line 3" in err and "row 2" in err
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("r,s\n1,2\n")
    assert cli.main(["fit", "--in", str(tiny)]) == cli.EXIT_USAGE
    assert cli.main(["fit", "--in", str(tmp_path / "missing.csv")]) == cli.EXIT_IO


def test_fit_nonconvergence_exit_code(tmp_path, monkeypatch):
    data = tmp_path / "d.csv"
    write_dataset(data, sample_dataset(BnmoParams(1, 3, 0.8), -1, 50, make_rng(3)))
    real = fit_mle

    def stalled(d, cfg=None):
        res = real(d, cfg)
        res.converged = False
        res.message = "iteration budget exhausted"
        return res

    monkeypatch.setattr(cli, "fit_mle", stalled)
    assert cli.main(["fit", "--in", str(data), "--out", str(tmp_path / "f.json")]) == \
        cli.EXIT_NONCONVERGENCE


def test_measures_grid(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["measures", "--grid", "0.05:0.95:10", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 100
    assert all(float(r["tau"]) <= 0 and float(r["rho"]) <= 0 for r in rows)
    corner = [r for r in rows if float(r["alpha"]) == 0.05 and float(r["beta"]) == 0.05][0]
    assert abs(float(corner["rho_over_tau"]) - 1.5) < 0.05
    assert cli.main(["measures", "--grid", "", "--out", str(out)]) == cli.EXIT_USAGE
    assert cli.main(["measures", "--grid", "0:1:3", "--out", str(out)]) == cli.EXIT_USAGE


def test_measures_from_fit(tmp_path):
    fit = tmp_path / "f.json"
    fit.write_text(json.dumps(FitResult(BnmoParams(1, 1, 1), -1.0, 1, 0, 1, True, (), 1.0)
                              .to_dict()))
    out = tmp_path / "m.csv"
    assert cli.main(["measures", "--fit", str(fit), "--out", str(out)]) == 0
    row = _rows(out)[0]
    assert float(row["rho"]) == pytest.approx(-0.2952380952, abs=1e-8)


def test_stress_grid(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["stress", "--grid", "0.05:0.95:7", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 49
    vals = [float(r["p_r_less_s"]) for r in rows]
    assert all(0 < v < 1 for v in vals)
    diag = [float(r["p_r_less_s"]) for r in rows if r["alpha"] == r["beta"]]
    assert len(diag) == 7 and all(v == 0.5 for v in diag)


def test_gof_command(tmp_path):
    data = tmp_path / "d.csv"
    write_dataset(data, sample_dataset(BnmoParams(1, 3, 0.8), -1, 40, make_rng(4)))
    out = tmp_path / "gof.json"
    assert cli.main(["gof", "--in", str(data), "--bootstrap", "10", "--out", str(out)]) == \
        cli.EXIT_USAGE
    assert cli.main(["gof", "--in", str(data), "--bootstrap", "200", "--no-refit",
                     "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    for key in ("min", "q1", "median", "mean", "q3", "max", "sd"):
        assert key in rep["descriptive"]["r"] and key in rep["descriptive"]["s"]
    for key in ("spearman_rho", "kendall_tau", "rho_tau_ratio"):
        assert key in rep["descriptive"]
    assert 0 < rep["joint"]["p_value"] <= 1
    assert "joint_implied" in rep["marginal"]["r"]


def test_bench_command(tmp_path, capsys):
    args = ["bench", "--theta1", "1", "--theta2", "3", "--theta12", "0.8", "--sizes", "20",
            "--reps", "1", "--seed", "3", "--workers", "1", "--out"]
    assert cli.main(args + [str(tmp_path / "a.csv")]) == 0
    assert "warning" in capsys.readouterr().err
    rows = _rows(tmp_path / "a.csv")
    assert [r["parameter"] for r in rows] == ["theta1", "theta2", "theta12"]
    assert cli.main(args + [str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_console_entry_point(tmp_path):
    out = tmp_path / "e.csv"
    proc = subprocess.run([sys.executable, "-m", "nmo.cli", "stress", "--grid", "0.5",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert float(_rows(out)[0]["p_r_less_s"]) == 0.5


@pytest.mark.slow
def test_simulate_fit_round_trip_over_seeds(tmp_path):
    hits = 0
    for seed in range(100):
        path = tmp_path / f"d{seed}.csv"
        assert cli.main(["simulate", "--theta1", "1", "--theta2", "3", "--theta12", "0.8",
                         "--m", "2000", "--seed", str(seed), "--out", str(path)]) == 0
        res = fit_mle(read_dataset(path))
        est = np.array(res.theta_hat.as_tuple())
        hits += bool(np.all(np.abs(est - [1, 3, 0.8]) < 0.15))
    assert hits >= 95
