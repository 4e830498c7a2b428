"""Full and constrained maximum likelihood for stratified models.

The likelihood separates over strata given psi, so the constrained fit is
q one-dimensional maximizations and the full fit is a one-dimensional
Newton search on the profile log-likelihood l_p(psi) = l(psi, lam_hat_psi).

Strata of a discrete model whose nuisance maximizer lies at infinity
(all-0 or all-1 responses) are dropped from every fit by default; the
``retained`` and ``dropped_strata`` fields of :class:`FitResult` record
which strata take part, and ``theta.lam`` lists the retained strata only.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import (AllStrataDiverged, DimensionError, NegativeDeviance, NoConvergence,
                     NonFiniteDensity, NonPositiveInformation, StratumDiverged)
from .model_api import ParamPoint
from .models import _dispatch as D

GRAD_TOL = 1e-8
MAX_ITER = 50


@dataclass(frozen=True)
class FitResult:
    """Outcome of a full or constrained fit.

    Attributes
    ----------
    theta : ParamPoint
        ``psi`` and the nuisance estimates of the retained strata.
    loglik : float
        Log-likelihood over retained strata at ``theta``.
    iterations : int
        Outer Newton steps (full fit) or summed inner steps (constrained).
    converged : bool
    dropped_strata : tuple of int
        0-based indices of strata excluded from the likelihood.
    retained : tuple of int
        0-based indices of the strata that ``theta.lam`` refers to.
    profile_score : float
        U_psi at ``theta``.
    profile_info : float
        Block-formula observed information j_p at ``theta``.
    """

    theta: ParamPoint
    loglik: float
    iterations: int
    converged: bool
    dropped_strata: tuple
    retained: tuple
    profile_score: float
    profile_info: float

    @property
    def psi(self):
        return self.theta.psi


class Prepared:
    """Kernel-ready form of a (model, dataset) pair.

    Holds the padded arrays, per-stratum sufficient statistics and the
    retained-strata mask; reused across the fits, pivots and bootstraps of
    one dataset.
    """

    def __init__(self, model, data, drop_degenerate=True):
        self.model = model
        self.data = data
        self.kind = model.kind
        self.Y, self.X, self.M = model.arrays(data)
        self.ST = np.zeros((data.q, D.NSTAT))
        keep = np.zeros(data.q, dtype=np.bool_)
        K.compute_stats(self.kind, self.Y, self.X, self.M, self.ST, keep)
        if not drop_degenerate:
            keep[:] = True
        if not keep.any():
            raise AllStrataDiverged(f"all {data.q} strata are degenerate")
        self.keep = keep
        self.retained = tuple(int(i) for i in np.flatnonzero(keep))
        self.dropped = tuple(int(i) for i in np.flatnonzero(~keep))

    @property
    def q(self):
        return self.data.q

    def full_lam(self, fit):
        """Length-q nuisance buffer with the fit's retained values filled in."""
        if fit.retained != self.retained:
            raise DimensionError("fit was computed on a different set of retained strata")
        lam = np.zeros(self.q)
        lam[list(self.retained)] = fit.theta.lam
        return lam

    def start_lam(self, psi):
        lam = np.zeros(self.q)
        for i in self.retained:
            lam[i] = D.lambda_start(self.kind, tuple(self.ST[i]), psi)
        return lam


def raise_for_status(code, bad, psi, where=""):
    """Map a kernel status to the matching exception (no-op for OK)."""
    if code == K.OK:
        return
    at = f"{where} at psi={psi!r}" if where else f"at psi={psi!r}"
    if code == K.STRATUM_DIVERGED:
        raise StratumDiverged(bad, psi)
    if code == K.NO_CONVERGENCE:
        raise NoConvergence(f"Newton iterations did not converge {at}")
    if code == K.PSI_UNBOUNDED:
        raise NoConvergence("the likelihood is monotone in psi; psi_hat is infinite")
    if code == K.ALL_DROPPED:
        raise AllStrataDiverged("all strata are degenerate")
    if code == K.NONPOSITIVE_INFO:
        raise NonPositiveInformation(f"non-positive information {at}")
    if code == K.NEGATIVE_DEVIANCE:
        raise NegativeDeviance(f"l(full fit) < l(constrained fit) {at}")
    raise NonFiniteDensity(f"non-finite likelihood quantities {at}")


def prepare(model, data, drop_degenerate=True):
    return data if isinstance(data, Prepared) else Prepared(model, data, drop_degenerate)


def _result(prep, psi, lam, iterations):
    lp, up, jp, _ = K.profile_terms(prep.kind, prep.ST, prep.keep, psi, lam)
    theta = ParamPoint(psi, lam[list(prep.retained)])
    return FitResult(theta, float(lp), int(iterations), True, prep.dropped, prep.retained,
                     float(up), float(jp))


def fit_constrained(model, data, psi, *, warm_start=None, grad_tol=GRAD_TOL,
                    max_iter=MAX_ITER, drop_degenerate=True, exact=True):
    """Nuisance estimates lam_hat_psi at fixed ``psi``, one stratum at a time.

    Parameters
    ----------
    model : StratumModel
    data : StratifiedDataset or Prepared
    psi : float
    warm_start : FitResult, optional
        Start each inner Newton search from this fit's nuisance values.
    grad_tol, max_iter : float, int
        Stopping rule of the inner Newton searches.
    drop_degenerate : bool
        Exclude degenerate discrete strata (otherwise their divergence is
        reported as :class:`StratumDiverged`).
    exact : bool
        Use the model's exact nuisance solver when it has one.

    Raises
    ------
    StratumDiverged, NoConvergence, AllStrataDiverged
    """
    psi = float(psi)
    if not np.isfinite(psi):
        raise ValueError("psi must be finite")
    prep = prepare(model, data, drop_degenerate)
    if warm_start is not None:
        lam = prep.full_lam(warm_start)
        warm = True
    else:
        lam = np.zeros(prep.q)
        warm = False
    code, bad, iters = K.fit_lambdas(prep.kind, prep.ST, prep.keep, psi, lam, warm,
                                     exact and model.exact_lambda, grad_tol, max_iter)
    raise_for_status(code, bad, psi, "constrained fit")
    return _result(prep, psi, lam, iters)


def fit_mle(model, data, *, psi_start=None, grad_tol=GRAD_TOL, max_iter=MAX_ITER,
            drop_degenerate=True, exact=True):
    """Maximum likelihood estimate by Newton search on the profile likelihood.

    Starts from the model's moment-type guess unless ``psi_start`` is given.

    Raises
    ------
    NoConvergence, AllStrataDiverged, StratumDiverged
    """
    prep = prepare(model, data, drop_degenerate)
    if psi_start is None:
        psi_start = D.psi_start(prep.kind, prep.ST, prep.keep)
    psi0 = float(psi_start)
    lam = np.zeros(prep.q)
    code, psi, lp, up, jp, iters, bad = K.fit_full(
        prep.kind, prep.ST, prep.keep, psi0, lam, False,
        exact and model.exact_lambda, grad_tol, max_iter, np.nan)
    raise_for_status(code, bad, psi, "full fit")
    return _result(prep, float(psi), lam, iters)


def fit_pair(model, data, psi0, *, drop_degenerate=True):
    """Full fit and constrained fit at ``psi0`` that are mutually consistent.

    If the constrained likelihood exceeds the full one, the full Newton
    search stopped at a local maximum; it is restarted from ``psi0`` so the
    reported maximum dominates every point that was evaluated.

    Returns
    -------
    (FitResult, FitResult)
        Full and constrained fits on the same retained strata.
    """
    prep = prepare(model, data, drop_degenerate)
    full = fit_mle(model, prep)
    cons = fit_constrained(model, prep, psi0, warm_start=full)
    if cons.loglik - full.loglik > K.DEVIANCE_SLACK:
        again = fit_mle(model, prep, psi_start=psi0)
        if again.loglik > full.loglik:
            full = again
    return full, cons


def profile_loglik(model, data, psi, **kw):
    """l_p(psi) over retained strata."""
    return fit_constrained(model, data, psi, **kw).loglik


def profile_score(model, data, psi, **kw):
    """U_p(psi) = sum_i U_psi^i(psi, lam_hat_i,psi)."""
    return fit_constrained(model, data, psi, **kw).profile_score


def profile_info(model, data, psi, **kw):
    """j_p(psi) = sum_i (j_psipsi - j_psilam^2 / j_lamlam) at (psi, lam_hat_psi).

    Raises
    ------
    NonPositiveInformation
    """
    jp = fit_constrained(model, data, psi, **kw).profile_info
    if not jp > 0:
        raise NonPositiveInformation(f"profile information {jp!r} at psi={psi!r}")
    return jp


def partial_expected_info(model, data, theta):
    """i_psipsi - sum_i i_psilam_i^2 / i_lamlam_i from the expected information.

    ``theta`` must carry one nuisance value per stratum of ``data``.

    Raises
    ------
    NonPositiveInformation
    """
    from .model_api import information_blocks

    b = information_blocks(model, data, theta, observed=False)
    value = float(np.sum(b[:, 0]) - np.sum(b[:, 1] ** 2 / b[:, 2]))
    if not value > 0:
        raise NonPositiveInformation(f"partial information {value!r}")
    return value


def check_pair(full_fit, constrained_fit):
    if full_fit.retained != constrained_fit.retained:
        raise DimensionError("full and constrained fits use different retained strata")
    dev = full_fit.loglik - constrained_fit.loglik
    if dev < -K.DEVIANCE_SLACK:
        raise NegativeDeviance(f"likelihood drop {dev!r} is negative")
    return max(dev, 0.0)
