import math

import numpy as np
import pytest

from stratboot import ParamPoint, StratifiedDataset, build
from stratboot.errors import AllStrataDiverged, NonPositiveInformation, StratumDiverged
from stratboot.estimation import (GRAD_TOL, fit_constrained, fit_mle, partial_expected_info,
                                  profile_info, profile_loglik, profile_score)
from stratboot.model_api import information_blocks

import oracles
from _util import key, simulate, totals

NAMES = ["gamma", "beta", "curved_normal", "behrens_fisher", "matched_pairs"]


def sample(name, q=6, m=8, seed=3, psi=0.4):
    model = build(name)
    rng = np.random.default_rng(seed)
    theta = ParamPoint(psi, rng.uniform(-0.8, 0.8, q))
    return model, simulate(model, theta, m, key(seed))


# ---- examples ---------------------------------------------------------------

def test_gamma_constrained_example():
    model = build("gamma")
    data = StratifiedDataset([[2.0, 4.0], [5.0, 7.0]])
    fit = fit_constrained(model, data, math.log(2))
    np.testing.assert_allclose(fit.theta.lam, [math.log(1.5), math.log(3)], atol=1e-12)
    assert fit.psi == math.log(2)


def test_behrens_fisher_constrained_example():
    fit = fit_constrained(build("behrens_fisher"), StratifiedDataset([[-1.0, 1.0]]), 0.0)
    assert fit.theta.lam[0] == pytest.approx(0.0, abs=1e-12)


def test_behrens_fisher_mle_example():
    fit = fit_mle(build("behrens_fisher"), StratifiedDataset([[0.0, 2.0]]))
    assert fit.psi == pytest.approx(1.0, abs=1e-10)
    assert fit.theta.lam[0] == pytest.approx(0.0, abs=1e-10)


def test_behrens_fisher_profile_score_sign():
    model = build("behrens_fisher")
    data = StratifiedDataset([[1.0, 2.5, 3.0], [0.5, 4.0]])
    assert profile_score(model, data, 0.2) > 0
    assert profile_score(model, data, 5.0) < 0


def test_partial_info_example():
    data = StratifiedDataset([[0.0] * 4, [0.0] * 4])
    assert partial_expected_info(build("behrens_fisher"), data,
                                 ParamPoint(0.0, [0.0, math.log(2)])) == pytest.approx(6.0)


# ---- oracles ----------------------------------------------------------------

@pytest.mark.parametrize("name", NAMES)
def test_constrained_matches_golden_section(name):
    model = build(name)
    rng = np.random.default_rng(100)
    checked = 0
    for trial in range(50):
        psi = rng.uniform(-0.5, 1.0)
        theta = ParamPoint(psi, rng.uniform(-1.0, 1.0, 1))
        data = simulate(model, theta, 6, key(trial, seed=100))
        psi0 = psi + rng.uniform(-0.3, 0.3)
        try:
            fit = fit_constrained(model, data, psi0)
        except AllStrataDiverged:
            continue
        y, x = data.strata[0], model.design(6)
        lam = oracles.golden_lambda(name, y, x, fit.psi, float(fit.theta.lam[0]), 1.0)
        assert fit.theta.lam[0] == pytest.approx(lam, abs=1e-6)
        checked += 1
    assert checked >= 40


def test_gamma_closed_form_exact():
    model, data = sample("gamma", q=20, m=5)
    for psi in (-0.7, 0.1, 1.3):
        lam_exact = fit_constrained(model, data, psi).theta.lam
        expected = np.array([math.log(np.mean(y)) - psi for y in data.strata])
        np.testing.assert_allclose(lam_exact, expected, atol=1e-10, rtol=0)
        lam_newton = fit_constrained(model, data, psi, exact=False).theta.lam
        np.testing.assert_allclose(lam_newton, expected, atol=1e-10, rtol=0)


def test_curved_mle_matches_nested_grid():
    model, data = sample("curved_normal", q=5, m=8, seed=8, psi=math.log(0.5))
    fit = fit_mle(model, data)
    covs = [np.zeros(8)] * 5
    centres = list(fit_constrained(model, data, fit.psi).theta.lam)
    psi_ref = oracles.nested_grid_max(
        lambda p: oracles.profile("curved_normal", data.strata, covs, p, centres),
        fit.psi - 1.0, fit.psi + 1.0, passes=9)
    assert fit.psi == pytest.approx(psi_ref, abs=1e-5)


def test_gamma_fixture_golden():
    import json
    import pathlib
    here = pathlib.Path(__file__).parent / "data"
    golden = json.loads((here / "gamma_fixture_golden.json").read_text())
    data = StratifiedDataset.from_csv(here / "gamma_fixture.csv")
    assert fit_mle(build("gamma"), data).psi == pytest.approx(golden["psi_hat"], abs=1e-6)


# ---- properties -------------------------------------------------------------

@pytest.mark.parametrize("name", NAMES)
def test_fit_invariants(name):
    model, data = sample(name)
    fit = fit_mle(model, data)
    assert fit.converged
    sub = data.subset(fit.retained)
    ll, u_psi, u_lam = totals(model, sub, fit.psi, fit.theta.lam)
    assert fit.loglik == pytest.approx(ll, rel=1e-12, abs=1e-10)
    assert abs(u_psi) <= GRAD_TOL and np.max(np.abs(u_lam)) <= GRAD_TOL
    again = fit_constrained(model, data, fit.psi)
    np.testing.assert_allclose(again.theta.lam, fit.theta.lam, atol=1e-7, rtol=0)
    lp_hat = fit.loglik
    for d in (0.01, 0.05, 0.1, 0.2, 0.5):
        assert lp_hat >= profile_loglik(model, data, fit.psi + d)
        assert lp_hat >= profile_loglik(model, data, fit.psi - d)
    assert abs(profile_score(model, data, fit.psi)) < 1e-8
    assert profile_info(model, data, fit.psi) > 0


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("offset", [-0.3, 0.25])
def test_profile_derivatives_match_finite_differences(name, offset):
    model, data = sample(name)
    psi = fit_mle(model, data).psi + offset
    h = 1e-5
    fd_score = (profile_loglik(model, data, psi + h) - profile_loglik(model, data, psi - h)) / (2 * h)
    assert profile_score(model, data, psi) == pytest.approx(fd_score, rel=1e-5, abs=1e-7)
    fd_info = -(profile_score(model, data, psi + h) - profile_score(model, data, psi - h)) / (2 * h)
    assert profile_info(model, data, psi) == pytest.approx(fd_info, rel=1e-5)


def test_single_stratum_block_formula():
    model, data = sample("gamma", q=1, m=7)
    fit = fit_constrained(model, data, 0.3)
    b = information_blocks(model, data, fit.theta, observed=True)[0]
    j = np.array([[b[0], b[1]], [b[1], b[2]]])
    assert fit.profile_info == pytest.approx(j[0, 0] - j[0, 1] ** 2 / j[1, 1], rel=1e-12)


@pytest.mark.parametrize("name", NAMES)
def test_stratum_order_irrelevant(name):
    model, data = sample(name, q=8)
    perm = np.random.default_rng(1).permutation(8)
    shuffled = data.subset(perm)
    a = fit_constrained(model, data, 0.3, drop_degenerate=False) if name != "matched_pairs" else \
        fit_constrained(model, data, 0.3)
    b = fit_constrained(model, shuffled, 0.3, drop_degenerate=False) if name != "matched_pairs" \
        else fit_constrained(model, shuffled, 0.3)
    full_a = dict(zip(a.retained, a.theta.lam))
    full_b = dict(zip((int(perm[i]) for i in b.retained), b.theta.lam))
    assert full_a == full_b
    assert fit_mle(model, shuffled).psi == pytest.approx(fit_mle(model, data).psi, abs=1e-10)


@pytest.mark.parametrize("name", NAMES)
def test_warm_start_agrees_with_cold(name):
    model, data = sample(name)
    full = fit_mle(model, data)
    warm = fit_constrained(model, data, full.psi - 0.2, warm_start=full)
    cold = fit_constrained(model, data, full.psi - 0.2)
    np.testing.assert_allclose(warm.theta.lam, cold.theta.lam, atol=1e-8, rtol=0)


def test_gamma_partial_info_is_efficient_score_variance():
    model = build("gamma")
    theta = ParamPoint(0.3, [-0.5, 0.2, 1.0])
    m, reps = 5, 100_000
    b = information_blocks(model, StratifiedDataset([[1.0] * m] * 3), theta, observed=False)
    coef = b[:, 1] / b[:, 2]
    target = partial_expected_info(model, StratifiedDataset([[1.0] * m] * 3), theta)
    eff = np.empty(reps)
    for r in range(reps):
        data = simulate(model, theta, m, key(r, seed=55))
        _, u_psi, u_lam = totals(model, data, theta.psi, theta.lam)
        eff[r] = u_psi - coef @ u_lam
    var = eff.var(ddof=1)
    se = math.sqrt((np.mean((eff - eff.mean()) ** 4) - var ** 2) / reps)
    assert abs(var - target) <= 3 * se


# ---- degenerate strata --------------------------------------------------------

def test_matched_pairs_drop_policy():
    model = build("matched_pairs")
    data = StratifiedDataset([[1, 0, 0, 1], [0, 0, 0, 0], [1, 1, 0, 0], [1, 1, 1, 1], [0, 1, 1, 0]])
    fit = fit_mle(model, data)
    assert fit.dropped_strata == (1, 3)
    assert fit.retained == (0, 2, 4)
    assert fit.theta.q == 3
    cons = fit_constrained(model, data, 0.0)
    assert cons.dropped_strata == fit.dropped_strata
    with pytest.raises(StratumDiverged) as exc:
        fit_constrained(model, data, 0.0, drop_degenerate=False)
    assert exc.value.stratum == 1
    with pytest.raises(AllStrataDiverged):
        fit_mle(model, StratifiedDataset([[0, 0, 0, 0], [1, 1, 1, 1]]))


def test_profile_info_nonpositive_raises():
    # two identical observations make the Behrens-Fisher profile flat in no
    # direction, but far from psi_hat the curvature turns negative
    model = build("behrens_fisher")
    data = StratifiedDataset([[0.0, 1.0]])
    with pytest.raises(NonPositiveInformation):
        profile_info(model, data, 30.0)


def test_fit_pair_escapes_local_maximum():
    from stratboot.estimation import fit_pair
    from stratboot import default_truths
    model = build("behrens_fisher")
    truth = default_truths("behrens_fisher", 20, 6)
    found = 0
    for r in range(2000):
        data = simulate(model, truth, 4, key(r, seed=601))
        local = fit_mle(model, data)
        if fit_constrained(model, data, 0.0).loglik <= local.loglik:
            continue
        found += 1
        full, cons = fit_pair(model, data, 0.0)
        assert full.loglik >= cons.loglik
        assert abs(full.profile_score) < GRAD_TOL
        if found == 3:
            break
    assert found > 0


@pytest.mark.parametrize("strata", [
    [[1, 1, 0, 0]],
    [[0, 0, 1, 1], [0, 0, 0, 1]],
    [[1, 0, 0, 0], [1, 1, 1, 0]],
])
def test_matched_pairs_separation_has_no_finite_mle(strata):
    from stratboot.errors import NoConvergence
    data = StratifiedDataset([np.array(s, float) for s in strata])
    with pytest.raises(NoConvergence, match="monotone"):
        fit_mle(build("matched_pairs"), data)


def test_matched_pairs_interior_statistic_fits():
    data = StratifiedDataset([np.array([1.0, 1.0, 1.0, 0.0]), np.array([1.0, 0.0, 1.0, 1.0])])
    fit = fit_mle(build("matched_pairs"), data)
    assert math.isfinite(fit.psi) and abs(fit.profile_score) < 1e-8
