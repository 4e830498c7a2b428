import math

import numpy as np
import pytest
from scipy import stats

from stratboot import ParamPoint, default_truths
from stratboot.errors import ConfigError
from stratboot.simlab import (ARCHIVE_COLUMNS, ExperimentSpec, budget_breached, density_summary,
                              format_freq, moment_diagnostic, read_archive, run_experiment,
                              tail_report, write_archive)

SMALL = ExperimentSpec("gamma", q=12, m=4, n_reps=24, k_bootstrap=40, seed=3,
                       statistics=("R", "S", "T", "Rstar", "Ru", "Rc", "Sc", "Rl_c", "Rls_c",
                                   "Tls_u"))


def synthetic(values, pvalues, name="X"):
    return [(i, name, float(v), float(p), "normal") for i, (v, p) in enumerate(zip(values, pvalues))]


# ---- spec -------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [{"q": 0}, {"m": 1}, {"n_reps": 0}, {"k_bootstrap": 0},
                                 {"levels": (5, 1)}, {"levels": (0, 50)}, {"levels": (50, 100)},
                                 {"statistics": ("Q",)}, {"statistics": ("R", "R")},
                                 {"model": "weibull"}, {"fail_budget": 1.0}])
def test_spec_validation(bad):
    d = SMALL.to_dict()
    d.update(bad)
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict(d)


def test_spec_json_round_trip(tmp_path):
    path = tmp_path / "spec.json"
    SMALL.to_json(path)
    back = ExperimentSpec.from_json(path)
    assert back == SMALL and back.spec_hash() == SMALL.spec_hash()
    assert SMALL.with_(seed=4).spec_hash() != SMALL.spec_hash()
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({**SMALL.to_dict(), "colour": "red"})


# ---- experiments ------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_result():
    return run_experiment(SMALL, workers=1)


def test_report_bytes_independent_of_workers(small_result):
    ref = small_result.report.to_csv_text()
    for workers in (4, 16):
        assert run_experiment(SMALL, workers=workers).report.to_csv_text() == ref


def test_archive_round_trip_reproduces_report(small_result, tmp_path):
    path = tmp_path / "archive.csv.gz"
    write_archive(path, small_result.archive)
    again = read_archive(path)
    assert again == small_result.archive
    rebuilt = tail_report(again, SMALL.model, SMALL.q, SMALL.m, SMALL.levels, SMALL.statistics)
    assert rebuilt.to_csv_text() == small_result.report.to_csv_text()
    other = tmp_path / "again.csv.gz"
    write_archive(other, again)
    assert other.read_bytes() == path.read_bytes()


def test_archive_layout(small_result):
    assert len(small_result.archive) == SMALL.n_reps * len(SMALL.statistics)
    assert ARCHIVE_COLUMNS == ("replicate", "statistic", "value", "pvalue", "variant")
    variants = {row[1]: row[4] for row in small_result.archive}
    assert variants["Ru"] == "unconstrained" and variants["Rc"] == "constrained"
    assert variants["R"] == "normal"


def test_report_invariants(small_result):
    rep = small_result.report
    for row in rep.rows:
        assert 0 <= row.freq <= 100
        assert row.n_eff + rep.failures[row.statistic] == SMALL.n_reps
    for stat in SMALL.statistics:
        f = rep.frequencies(stat)
        assert all(a <= b for a, b in zip(f, f[1:]))
    meta = rep.metadata
    assert meta["spec_hash"] == SMALL.spec_hash() and meta["seed"] == 3
    assert "runtime_seconds" in meta and not small_result.budget_breached


def test_single_replicate_is_all_or_nothing():
    res = run_experiment(SMALL.with_(n_reps=1, statistics=["R", "Rc"]))
    assert {row.freq for row in res.report.rows} <= {0.0, 100.0}


def test_render_layout(small_result):
    text = small_result.report.render().splitlines()
    assert text[0] == "gamma  q=12  m=4"
    assert len(text) == 2 + len(SMALL.statistics)
    assert text[1].split() == ["1", "2.5", "5", "95", "97.5", "99"]
    assert format_freq(94.96) == "95.0" and format_freq(0.04) == "0.0"


def test_uniform_pvalues_match_nominal():
    rng = np.random.default_rng(0)
    p = rng.uniform(size=20_000)
    rep = tail_report(synthetic(stats.norm.ppf(p), p), "x", 1, 2)
    for row in rep.rows:
        lv = row.level / 100
        assert abs(row.freq / 100 - lv) <= 3 * math.sqrt(lv * (1 - lv) / p.size)


def test_budget_rule():
    assert not budget_breached({"R": 5}, 1000, 0.005)
    assert budget_breached({"R": 6}, 1000, 0.005)


def test_failures_counted_as_nan():
    rows = synthetic([0.1, np.nan, 0.3], [0.5, np.nan, 0.7])
    rep = tail_report(rows, "x", 1, 2, levels=(50.0,))
    assert rep.failures == {"X": 1} and rep.rows[0].n_eff == 2 and rep.rows[0].freq == 50.0


# ---- moment diagnostics -------------------------------------------------------------

def test_gamma_root_location_bias():
    truth = default_truths("gamma", 100, 1)
    d = moment_diagnostic("gamma", truth, 100, 4, "R", 400, seed=1)
    assert abs(d.mean) > 5 * d.se_mean and d.variance >= 0


def test_standard_error_scaling():
    truth = ParamPoint(0.0, np.linspace(0, 1, 10))
    a = moment_diagnostic("behrens_fisher", truth, 10, 4, "S", 500, seed=2)
    b = moment_diagnostic("behrens_fisher", truth, 10, 4, "S", 2000, seed=2)
    assert b.se_mean / a.se_mean == pytest.approx(0.5, rel=0.2)


def test_moment_diagnostic_rejects_bootstrap_statistics():
    with pytest.raises(ConfigError):
        moment_diagnostic("gamma", default_truths("gamma", 5, 1), 5, 4, "Rc", 10, seed=1)


# ---- density summaries ----------------------------------------------------------------

def test_density_qq_on_diagonal_for_normal_input():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(5000)
    summ = density_summary(synthetic(z, stats.norm.cdf(z)), "X")
    n = summ.n
    probs = (np.arange(1, n + 1) - 0.5) / n
    inner = (probs > 0.01) & (probs < 0.99)
    se = np.sqrt(probs * (1 - probs) / n) / stats.norm.pdf(summ.theoretical_q)
    assert np.all(np.abs(summ.empirical_q - summ.theoretical_q)[inner] <= 3 * se[inner] + 1e-12)


def test_uniform_pvalue_histogram_flat():
    rng = np.random.default_rng(2)
    p = rng.uniform(size=10_000)
    summ = density_summary(synthetic(stats.norm.ppf(p), p), "X", p_bins=20)
    counts = summ.p_density * p.size / 20
    expected = p.size / 20
    assert np.all(np.abs(counts - expected) <= 3 * math.sqrt(expected * (1 - 1 / 20)))


def test_density_csv(tmp_path):
    rng = np.random.default_rng(3)
    z = rng.standard_normal(200)
    summ = density_summary(synthetic(z, stats.norm.cdf(z)), "X")
    path = tmp_path / "d.csv"
    summ.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "panel,x,y"
    assert {line.split(",")[0] for line in lines[1:]} == {
        "density", "qq", "pvalue_density", "pvalue_normal_density"}
    with pytest.raises(ValueError):
        density_summary([], "X")


def test_gamma_root_density_shifted():
    spec = ExperimentSpec("gamma", q=100, m=4, n_reps=300, k_bootstrap=1, seed=5,
                          statistics=("R",))
    summ = density_summary(run_experiment(spec).archive, "R")
    assert abs(summ.mean) > 0.5 and summ.mean > 0
