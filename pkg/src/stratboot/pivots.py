"""First-order pivots R, S, T, their moment adjustments and normal-scale transforms."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import NonPositiveInformation
from .estimation import check_pair, fit_constrained, fit_mle, fit_pair, prepare
from . import _kernels as K


@dataclass(frozen=True)
class PivotSet:
    """Signed likelihood root ``r``, score statistic ``s`` and Wald statistic ``t`` at ``psi0``."""

    r: float
    s: float
    t: float
    psi0: float

    def get(self, name):
        return {"R": self.r, "S": self.s, "T": self.t}[name.upper()]


@dataclass(frozen=True)
class MomentAdjustment:
    """Mean and standard deviation of a statistic's bootstrap distribution."""

    mean: float
    sd: float
    source: str

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")
        if self.source not in ("constrained", "unconstrained"):
            raise ValueError(f"unknown source {self.source!r}")


def signed_root(model, data, psi0, full_fit, constrained_fit):
    """sign(psi_hat - psi0) * sqrt(2 (l(theta_hat) - l(theta_hat_psi0))).

    Likelihood drops in [-1e-6, 0) are treated as zero.

    Raises
    ------
    NegativeDeviance
        The drop is below -1e-6, so the full fit is not a maximum.
    """
    dev = check_pair(full_fit, constrained_fit)
    diff = full_fit.psi - float(psi0)
    if diff == 0.0:
        return 0.0
    return math.copysign(math.sqrt(2.0 * dev), diff)


def score_stat(model, data, psi0, constrained_fit):
    """U_p(psi0) / sqrt(i_psipsi.lam(theta_hat_psi0)), expected information.

    Raises
    ------
    NonPositiveInformation
    """
    prep = prepare(model, data)
    lam = prep.full_lam(constrained_fit)
    _, up, _, ip = K.profile_terms(prep.kind, prep.ST, prep.keep, float(psi0), lam)
    if not ip > 0:
        raise NonPositiveInformation(f"partial information {ip!r} at psi={psi0!r}")
    return float(up / math.sqrt(ip))


def wald_stat(model, data, psi0, full_fit):
    """(psi_hat - psi0) * sqrt(j_p(psi_hat)).

    Raises
    ------
    NonPositiveInformation
    """
    jp = full_fit.profile_info
    if not jp > 0:
        raise NonPositiveInformation(f"profile information {jp!r} at psi_hat")
    return float((full_fit.psi - float(psi0)) * math.sqrt(jp))


def pivot_set(model, data, psi0, full_fit=None, constrained_fit=None):
    """All three pivots at ``psi0``; fits are computed when not supplied."""
    prep = prepare(model, data)
    if full_fit is None and constrained_fit is None:
        full_fit, constrained_fit = fit_pair(model, prep, psi0)
    if full_fit is None:
        full_fit = fit_mle(model, prep)
    if constrained_fit is None:
        constrained_fit = fit_constrained(model, prep, psi0, warm_start=full_fit)
    return PivotSet(
        signed_root(model, prep, psi0, full_fit, constrained_fit),
        score_stat(model, prep, psi0, constrained_fit),
        wald_stat(model, prep, psi0, full_fit),
        float(psi0),
    )


def adjust(stat, adj, mode="location"):
    """Location (``stat - mean``) or location-scale (``(stat - mean)/sd``) adjustment."""
    if mode == "location":
        return stat - adj.mean
    if mode == "location_scale":
        return (stat - adj.mean) / adj.sd
    raise ValueError(f"unknown adjustment mode {mode!r}")


def normal_pvalue(stat):
    """Standard normal distribution function (accepts arrays)."""
    out = ndtr(np.asarray(stat, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def inverse_normal(p):
    """Standard normal quantile; raises ``ValueError`` outside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise ValueError("probability must lie strictly between 0 and 1")
    out = ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


def normal_score(p):
    """Inverse normal that maps 0 and 1 to -inf and +inf (for bootstrap p-values)."""
    arr = np.asarray(p, dtype=float)
    if not np.all((arr >= 0) & (arr <= 1)):
        raise ValueError("probability must lie in [0, 1]")
    out = ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out
