import csv
import io
import json
import math
import os
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from stratboot.cli import main
from stratboot.simlab import ExperimentSpec, write_archive

DATA = pathlib.Path(__file__).parent / "data"
FIXTURE = str(DATA / "gamma_fixture.csv")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def usage(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    return exc.value.code, capsys.readouterr().err


def rows(text):
    return {r["statistic"]: (float(r["value"]), float(r["pvalue"]))
            for r in csv.DictReader(io.StringIO(text))}


# ---- fit ------------------------------------------------------------------------

def test_fit_behrens_fisher(capsys, tmp_path):
    path = tmp_path / "bf.csv"
    path.write_text("stratum,y\n1,0\n1,2\n")
    code, out, _ = run(capsys, "fit", "--model", "behrens_fisher", "--data", str(path),
                       "--out", str(tmp_path))
    assert code == 0 and "psi_hat" in out
    result = json.loads((tmp_path / "fit.json").read_text())
    assert result["psi_hat"] == pytest.approx(1.0, abs=1e-10)
    assert result["lambda_hat"] == [pytest.approx(0.0, abs=1e-10)]
    assert result["dropped_strata"] == []
    assert set(result) >= {"psi_hat", "lambda_hat", "loglik", "dropped_strata"}


def test_fit_fixture_golden(capsys, tmp_path):
    golden = json.loads((DATA / "gamma_fixture_golden.json").read_text())
    assert run(capsys, "fit", "--model", "gamma", "--data", FIXTURE, "--out", str(tmp_path))[0] == 0
    result = json.loads((tmp_path / "fit.json").read_text())
    assert result["psi_hat"] == pytest.approx(golden["psi_hat"], abs=1e-6)


def test_fit_reports_dropped_strata(capsys, tmp_path):
    path = tmp_path / "mp.csv"
    path.write_text("1,1\n1,0\n1,0\n1,1\n2,0\n2,0\n2,0\n2,0\n3,1\n3,1\n3,0\n3,1\n")
    assert run(capsys, "fit", "--model", "matched_pairs", "--data", str(path),
               "--out", str(tmp_path))[0] == 0
    result = json.loads((tmp_path / "fit.json").read_text())
    assert result["dropped_strata"] == [2] and result["lambda_hat"][1] is None


def test_malformed_csv_names_line(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("stratum,y\n1,0.5\n1,0.7\n2,oops\n2,0.1\n")
    code, _, err = run(capsys, "fit", "--model", "gamma", "--data", str(path))
    assert code == 1 and "line 4" in err


def test_missing_file_and_bad_model(capsys, tmp_path):
    assert run(capsys, "fit", "--model", "gamma", "--data", str(tmp_path / "none.csv"))[0] == 1
    assert usage(capsys, "fit", "--model", "weibull", "--data", FIXTURE)[0] == 1


def test_fit_failure_is_user_error(capsys, tmp_path):
    path = tmp_path / "sep.csv"
    path.write_text("1,1\n1,1\n1,0\n1,0\n")  # perfect separation: psi_hat is infinite
    code, _, err = run(capsys, "fit", "--model", "matched_pairs", "--data", str(path))
    assert code == 1 and err.startswith("stratboot: error")


# ---- pvalue --------------------------------------------------------------------------

def test_pvalue_rows_and_determinism(capsys, tmp_path):
    argv = ["pvalue", "--model", "gamma", "--data", FIXTURE, "--psi0", "0.9", "--k", "150",
            "--seed", "3"]
    code, first, _ = run(capsys, *argv, "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "pvalue.csv").read_text() == first
    assert run(capsys, *argv)[1] == first
    got = rows(first)
    expected = {"R", "S", "T", "Rstar"}
    for x in "RST":
        for tag in "uc":
            expected |= {f"{x}{tag}", f"{x}l_{tag}", f"{x}ls_{tag}"}
    assert set(got) == expected
    for name, (value, p) in got.items():
        assert 0 <= p <= 1


def test_pvalue_single_variant(capsys):
    code, out, _ = run(capsys, "pvalue", "--model", "gamma", "--data", FIXTURE, "--psi0", "1.0",
                       "--k", "50", "--variant", "constrained")
    assert code == 0 and "Rc" in rows(out) and "Ru" not in rows(out)


def test_pvalue_at_mle_is_zero(capsys, tmp_path):
    run(capsys, "fit", "--model", "gamma", "--data", FIXTURE, "--out", str(tmp_path))
    psi_hat = json.loads((tmp_path / "fit.json").read_text())["psi_hat"]
    code, out, _ = run(capsys, "pvalue", "--model", "gamma", "--data", FIXTURE,
                       "--psi0", repr(psi_hat), "--k", "20")
    got = rows(out)
    assert code == 0
    assert got["R"][0] == 0.0 and got["T"][0] == 0.0 and abs(got["S"][0]) < 1e-8


def test_pvalue_zero_k_is_usage_error(capsys):
    code, err = usage(capsys, "pvalue", "--model", "gamma", "--data", FIXTURE, "--psi0", "1",
                      "--k", "0")
    assert code == 1 and "--k" in err


def test_pvalue_budget_breach_exits_2(capsys, tmp_path):
    path = tmp_path / "mp.csv"
    path.write_text("1,1\n1,0\n1,1\n1,0\n")
    code, _, err = run(capsys, "pvalue", "--model", "matched_pairs", "--data", str(path),
                       "--psi0", "0", "--k", "100")
    assert code == 2 and "failed" in err


# ---- simulate / report ------------------------------------------------------------------

def spec_file(tmp_path, **kw):
    d = dict(model="gamma", q=10, m=4, n_reps=12, k_bootstrap=30, seed=0,
             statistics=["R", "Rc", "Ru"])
    d.update(kw)
    path = tmp_path / "spec.in.json"
    path.write_text(json.dumps(d))
    return str(path)


def test_simulate_requires_seed(capsys, tmp_path):
    assert usage(capsys, "simulate", spec_file(tmp_path))[0] == 1


def test_simulate_and_report(capsys, tmp_path):
    out = tmp_path / "run"
    code, table, _ = run(capsys, "simulate", spec_file(tmp_path), "--seed", "11",
                         "--out", str(out))
    assert code == 0 and table.startswith("gamma  q=10  m=4")
    for name in ("report.csv", "archive.csv.gz", "spec.json", "metadata.json"):
        assert (out / name).exists()
    assert json.loads((out / "spec.json").read_text())["seed"] == 11
    assert json.loads((out / "metadata.json").read_text())["seed"] == 11

    again = tmp_path / "again"
    assert run(capsys, "simulate", spec_file(tmp_path), "--seed", "11", "--out", str(again))[0] == 0
    assert (again / "report.csv").read_bytes() == (out / "report.csv").read_bytes()
    assert (again / "archive.csv.gz").read_bytes() == (out / "archive.csv.gz").read_bytes()

    rep = tmp_path / "rep"
    code, table2, _ = run(capsys, "report", str(out), "--out", str(rep), "--density", "R")
    assert code == 0 and table2 == table
    assert (rep / "report.csv").read_bytes() == (out / "report.csv").read_bytes()
    assert (rep / "density_R.csv").exists()


def test_simulate_budget_breach(capsys, tmp_path):
    spec = spec_file(tmp_path, model="matched_pairs", q=1, m=2, n_reps=20, statistics=["R"])
    code, _, err = run(capsys, "simulate", spec, "--seed", "1", "--out", str(tmp_path / "o"))
    assert code == 2 and "budget" in err


def test_simulate_bad_spec(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"model": "gamma", "q": 0, "m": 4}')
    assert run(capsys, "simulate", str(path), "--seed", "1", "--out", str(tmp_path / "o"))[0] == 1


def test_report_uniform_archive(capsys, tmp_path):
    p = np.random.default_rng(4).uniform(size=40_000)
    write_archive(tmp_path / "archive.csv.gz",
                  [(i, "R", 0.0, float(v), "normal") for i, v in enumerate(p)])
    ExperimentSpec("gamma", 1, 2, n_reps=p.size, statistics=("R",)).to_json(tmp_path / "spec.json")
    out = tmp_path / "rep"
    code, _, _ = run(capsys, "report", str(tmp_path / "archive.csv.gz"), "--out", str(out))
    assert code == 0
    rows_ = list(csv.DictReader((out / "report.csv").open()))
    assert len(rows_) == 6
    for row in rows_:
        level = float(row["level"])
        se = 100 * math.sqrt(level / 100 * (1 - level / 100) / p.size)
        assert abs(float(row["freq"]) - level) <= 3 * se


def test_report_missing_archive(capsys, tmp_path):
    assert run(capsys, "report", str(tmp_path))[0] == 1


def test_console_script():
    exe = pathlib.Path(sys.executable).with_name("stratboot")
    cmd = [str(exe)] if exe.exists() else [sys.executable, "-m", "stratboot.cli"]
    res = subprocess.run(cmd + ["fit", "--model", "gamma", "--data", FIXTURE],
                         capture_output=True, text=True, env=dict(os.environ))
    assert res.returncode == 0 and "psi_hat" in res.stdout
