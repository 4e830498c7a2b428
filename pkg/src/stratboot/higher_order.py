"""Modified signed likelihood root R* from expected likelihood moments.

For a signed root r at psi0 the modified root is

    R* = r + log(u / r) / r,

where u is Skovgaard's covariance approximation to the sample-space
derivatives. With theta_hat the full fit, theta_tilde the constrained fit
and all moments taken under theta_hat,

    q   = Cov(U(theta_hat), l(theta_hat) - l(theta_tilde))
    S   = E[U(theta_hat) U(theta_tilde)^T]
    u   = |j(theta_hat)|^{1/2} |i(theta_hat)|^{-1} |S| |j_lamlam(theta_tilde)|^{-1/2}
          * (S^{-1} q)_psi.

Because every nuisance parameter lives in a single stratum, S has an arrow
shape and the determinants factor over strata, so u is assembled from
per-stratum scalars in log space. Moments are computed in closed form when
the model supplies them and by Monte Carlo otherwise.

Near r = 0 the formula is numerically singular although R* is smooth; for
|r| below a small window R* is interpolated by a quadratic in r through
exact evaluations at r = -h, h and 2h sign(r).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NoConvergence, NonPositiveInformation, UnavailableExpectations
from .estimation import fit_constrained, fit_mle, fit_pair, prepare, raise_for_status
from .pivots import signed_root
from .rng import derive, seed_key

ANALYTIC = "analytic-expectation"
MONTE_CARLO = "monte-carlo-expectation"


@dataclass(frozen=True)
class RStarOptions:
    """Settings for :func:`rstar`.

    Attributes
    ----------
    method : {"auto", "analytic", "monte_carlo"}
        ``auto`` uses closed-form moments when the model has them.
    mc_size : int
        Draws per observation slot for Monte Carlo moments; 0 disables them.
    seed : int
        Seed of the Monte Carlo stream (ignored when ``key`` is given).
    key : int, optional
        Explicit stream key; the same key is reused at every psi so that
        R* is a smooth function of psi.
    window : float
        Half-width h of the interpolation window around r = 0.
    """

    method: str = "auto"
    mc_size: int = 2000
    seed: int = 0
    key: int = None
    window: float = 0.05

    def stream_key(self):
        if self.key is not None:
            return np.uint64(self.key)
        return derive(seed_key(self.seed), 3)


@dataclass(frozen=True)
class RStarResult:
    """R* together with its ingredients.

    ``correction`` is ``rstar - r``; ``u`` is the adjusted quantity (None
    when R* came from the near-zero interpolation).
    """

    rstar: float
    r: float
    correction: float
    method: str
    mc_size: int
    u: float = None
    interpolated: bool = False


def rstar_from(r, u):
    """r + log(u/r)/r; requires u/r > 0 and r != 0."""
    ratio = u / r
    if not ratio > 0:
        raise ArithmeticError(f"u/r = {ratio!r} is not positive")
    return r + math.log(ratio) / r


class _Context:
    """Full-fit quantities shared by every R* evaluation on one dataset."""

    def __init__(self, model, prep, full, options):
        self.model = model
        self.prep = prep
        self.full = full
        idx = list(prep.retained)
        self.kind = prep.kind
        self.ST = np.ascontiguousarray(prep.ST[idx])
        self.X = np.ascontiguousarray(prep.X[idx])
        self.M = np.ascontiguousarray(prep.M[idx])
        self.keep = np.ones(len(idx), dtype=np.bool_)
        self.lam_hat = np.array(full.theta.lam)
        n = len(idx)
        obs = np.empty((n, 6))
        exp = np.empty((n, 3))
        K.stratum_blocks(self.kind, self.ST, full.psi, self.lam_hat, obs, exp)
        self.jll_hat = obs[:, 5]
        self.ill_hat = exp[:, 2]
        self.ip_hat = float(np.sum(exp[:, 0] - exp[:, 1] ** 2 / exp[:, 2]))
        self.jp_hat = full.profile_info

        method = options.method
        if method == "auto":
            method = "analytic" if model.analytic_expectations else "monte_carlo"
        if method == "analytic" and not model.analytic_expectations:
            raise UnavailableExpectations(f"model {model.name!r} has no closed-form moments")
        if method == "monte_carlo" and options.mc_size < 1:
            raise UnavailableExpectations("Monte Carlo moments disabled (mc_size = 0)")
        if method not in ("analytic", "monte_carlo"):
            raise ValueError(f"unknown method {options.method!r}")
        self.method = ANALYTIC if method == "analytic" else MONTE_CARLO
        self.mc_size = int(options.mc_size) if method == "monte_carlo" else None
        self.key = options.stream_key()
        if not (self.jp_hat > 0 and self.ip_hat > 0 and np.all(self.jll_hat > 0)
                and np.all(self.ill_hat > 0)):
            raise NonPositiveInformation("information at the full fit is not positive")

    def log_u(self, psi, lam_c):
        """(log|u|, sign u) at the constrained point (psi, lam_c)."""
        n = self.ST.shape[0]
        cov = np.empty((n, 4))
        if self.method == ANALYTIC:
            K.analytic_covariances(self.kind, self.ST, self.full.psi, self.lam_hat, psi, lam_c, cov)
        else:
            K.mc_covariances(self.kind, self.X, self.M, self.full.psi, self.lam_hat, psi, lam_c,
                             self.key, self.mc_size, self.model.iid, cov)
        obs = np.empty((n, 6))
        exp = np.empty((n, 3))
        K.stratum_blocks(self.kind, self.ST, psi, lam_c, obs, exp)
        jll_c = obs[:, 5]
        s_ll = cov[:, 3]
        if not (np.all(jll_c > 0) and np.all(s_ll > 0)):
            raise NonPositiveInformation("nuisance information or score covariance is not positive")
        d = float(np.sum(cov[:, 0]) - np.sum(cov[:, 2] * cov[:, 1] / s_ll))
        if d == 0.0:
            return -math.inf, 0.0
        log_u = (0.5 * math.log(self.jp_hat) - math.log(self.ip_hat) + math.log(abs(d))
                 + float(np.sum(np.log(s_ll) + 0.5 * np.log(self.jll_hat)
                                - np.log(self.ill_hat) - 0.5 * np.log(jll_c))))
        return log_u, math.copysign(1.0, d)

    def rstar_at(self, psi, lam_c, r):
        log_u, sign = self.log_u(psi, lam_c)
        if sign * r <= 0 or not math.isfinite(log_u):
            raise ArithmeticError(f"u and r disagree in sign at psi={psi!r}")
        corr = (log_u - math.log(abs(r))) / r
        return r + corr, sign * math.exp(log_u)


def _constrained(ctx, psi, lam):
    code, bad, lp, up, jp = K.profile_at(ctx.kind, ctx.ST, ctx.keep, psi, lam, True,
                                         ctx.model.exact_lambda, 1e-10, 100)
    raise_for_status(code, bad, psi, "constrained fit")
    dev = max(ctx.full.loglik - lp, 0.0)
    diff = ctx.full.psi - psi
    r = math.copysign(math.sqrt(2.0 * dev), diff) if diff != 0 else 0.0
    return r, up


def _psi_for_root(ctx, target):
    """psi with R(psi) = target by Newton on dR/dpsi = -U_p/R."""
    psi = ctx.full.psi - target / math.sqrt(ctx.jp_hat)
    lam = ctx.lam_hat.copy()
    for _ in range(60):
        r, up = _constrained(ctx, psi, lam)
        if abs(r - target) <= 1e-12 * (1.0 + abs(target)):
            return psi, lam, r
        if r == 0.0 or up == 0.0:
            psi -= 0.5 * target / math.sqrt(ctx.jp_hat)
            continue
        psi += (r - target) * r / up
    raise NoConvergence(f"could not place psi at signed root {target!r}")


def rstar(model, data, psi0, full_fit=None, constrained_fit=None, options=None):
    """Modified signed likelihood root at ``psi0``.

    Parameters
    ----------
    model : StratumModel
    data : StratifiedDataset or Prepared
    psi0 : float
    full_fit, constrained_fit : FitResult, optional
        Computed when not supplied.
    options : RStarOptions, optional

    Returns
    -------
    RStarResult

    Raises
    ------
    UnavailableExpectations
        The requested moments cannot be computed for this model.
    NonPositiveInformation, NoConvergence
    """
    options = options or RStarOptions()
    prep = prepare(model, data)
    if full_fit is None and constrained_fit is None:
        full_fit, constrained_fit = fit_pair(model, prep, psi0)
    if full_fit is None:
        full_fit = fit_mle(model, prep)
    if constrained_fit is None:
        constrained_fit = fit_constrained(model, prep, psi0, warm_start=full_fit)
    r = signed_root(model, prep, psi0, full_fit, constrained_fit)
    ctx = _Context(model, prep, full_fit, options)
    h = float(options.window)

    if abs(r) >= h:
        value, u = ctx.rstar_at(float(psi0), np.array(constrained_fit.theta.lam), r)
        return RStarResult(value, r, value - r, ctx.method, ctx.mc_size, u, False)

    side = 1.0 if r >= 0 else -1.0
    nodes_r = []
    nodes_v = []
    for target in (-h, h, 2.0 * h * side):
        psi, lam, r_node = _psi_for_root(ctx, target)
        nodes_r.append(r_node)
        nodes_v.append(ctx.rstar_at(psi, lam, r_node)[0])
    coef = np.polyfit(nodes_r, nodes_v, 2)
    value = float(np.polyval(coef, r))
    return RStarResult(value, r, value - r, ctx.method, ctx.mc_size, None, True)
