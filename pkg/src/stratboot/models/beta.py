"""Stratified beta with common precision.

psi = log(precision phi), lambda_i = logit(mean mu_i); shape parameters
a = mu phi, b = (1 - mu) phi. Stratum statistics:
``[m, sum log y, sum log(1 - y), sum y, sum y^2]``.
"""
import math

from .._jit import njit
from ..rng import log_std_gamma
from ..special import digamma, log_beta, trigamma
from ._common import expit

NSTAT = 5
_Y_HI = 1.0 - 2.0 ** -53
_Y_LO = 2.2250738585072014e-308


@njit
def _shapes(psi, lam):
    phi = math.exp(psi)
    mu = expit(lam)
    nu = expit(-lam)
    return phi, mu * phi, nu * phi, phi * mu * nu, mu, nu


@njit
def log_density(y, x, psi, lam):
    if not (0.0 < y < 1.0):
        return -math.inf
    phi, a, b, d, mu, nu = _shapes(psi, lam)
    return -log_beta(a, b) + (a - 1.0) * math.log(y) + (b - 1.0) * math.log1p(-y)


@njit
def score(y, x, psi, lam):
    phi, a, b, d, mu, nu = _shapes(psi, lam)
    dphi = digamma(phi)
    sa = dphi - digamma(a) + math.log(y)
    sb = dphi - digamma(b) + math.log1p(-y)
    return a * sa + b * sb, d * (sa - sb)


@njit
def _info_parts(psi, lam, sa, sb, m):
    phi, a, b, d, mu, nu = _shapes(psi, lam)
    tphi = trigamma(phi)
    haa = m * (tphi - trigamma(a))
    hbb = m * (tphi - trigamma(b))
    hab = m * tphi
    jpp = -(a * sa + b * sb + a * a * haa + 2.0 * a * b * hab + b * b * hbb)
    jpl = -(d * (sa - sb) + d * (a * haa + b * hab - a * hab - b * hbb))
    jll = -((nu - mu) * d * (sa - sb) + d * d * (haa - 2.0 * hab + hbb))
    return jpp, jpl, jll


@njit
def observed_info(y, x, psi, lam):
    phi, a, b, d, mu, nu = _shapes(psi, lam)
    dphi = digamma(phi)
    sa = dphi - digamma(a) + math.log(y)
    sb = dphi - digamma(b) + math.log1p(-y)
    return _info_parts(psi, lam, sa, sb, 1.0)


@njit
def expected_info(x, psi, lam):
    return _info_parts(psi, lam, 0.0, 0.0, 1.0)


@njit
def sample(x, psi, lam, key, ctr):
    phi, a, b, d, mu, nu = _shapes(psi, lam)
    la, ctr = log_std_gamma(a, key, ctr)
    lb, ctr = log_std_gamma(b, key, ctr)
    y = expit(la - lb)
    # values closer to 0 or 1 than double precision can hold are clamped
    if y > _Y_HI:
        y = _Y_HI
    elif y < _Y_LO:
        y = _Y_LO
    return y, ctr


@njit
def stats(Y, X, i, m, out):
    s1 = 0.0
    s2 = 0.0
    s3 = 0.0
    s4 = 0.0
    for j in range(m):
        s1 += math.log(Y[i, j])
        s2 += math.log1p(-Y[i, j])
        s3 += Y[i, j]
        s4 += Y[i, j] * Y[i, j]
    out[i, 0] = m
    out[i, 1] = s1
    out[i, 2] = s2
    out[i, 3] = s3
    out[i, 4] = s4


@njit
def psi_consts(psi):
    phi = math.exp(psi)
    return phi, digamma(phi), trigamma(phi), 0.0


@njit
def stratum_eval(st, psi, pc, lam):
    m = st[0]
    phi = pc[0]
    mu = expit(lam)
    nu = expit(-lam)
    a = mu * phi
    b = nu * phi
    d = phi * mu * nu
    sa = m * (pc[1] - digamma(a)) + st[1]
    sb = m * (pc[1] - digamma(b)) + st[2]
    haa = m * (pc[2] - trigamma(a))
    hbb = m * (pc[2] - trigamma(b))
    hab = m * pc[2]
    ll = -m * log_beta(a, b) + (a - 1.0) * st[1] + (b - 1.0) * st[2]
    u_psi = a * sa + b * sb
    u_lam = d * (sa - sb)
    jpp = -(u_psi + a * a * haa + 2.0 * a * b * hab + b * b * hbb)
    jpl = -(u_lam + d * (a * haa + b * hab - a * hab - b * hbb))
    jll = -((nu - mu) * u_lam + d * d * (haa - 2.0 * hab + hbb))
    return ll, u_psi, u_lam, jpp, jpl, jll


@njit
def stratum_expected(st, psi, pc, lam):
    m = st[0]
    phi = pc[0]
    mu = expit(lam)
    nu = expit(-lam)
    a = mu * phi
    b = nu * phi
    d = phi * mu * nu
    ta = trigamma(a)
    tb = trigamma(b)
    haa = m * (pc[2] - ta)
    hbb = m * (pc[2] - tb)
    hab = m * pc[2]
    ipp = -(a * a * haa + 2.0 * a * b * hab + b * b * hbb)
    ipl = -d * (a * haa + b * hab - a * hab - b * hbb)
    ill = d * d * m * (ta + tb)
    return ipp, ipl, ill


@njit
def lambda_exact(st, psi, pc):
    return 0.0, -1


@njit
def lambda_start(st, psi):
    mean = st[3] / st[0]
    mean = min(max(mean, 1e-6), 1.0 - 1e-6)
    return math.log(mean / (1.0 - mean))


@njit
def psi_start(ST, keep):
    # pooled method of moments for the precision
    num = 0.0
    den = 0.0
    for i in range(ST.shape[0]):
        if keep[i]:
            m = ST[i, 0]
            mean = ST[i, 3] / m
            var = (ST[i, 4] - m * mean * mean) / (m - 1.0)
            num += (m - 1.0) * mean * (1.0 - mean)
            den += (m - 1.0) * var
    if not den > 0.0:
        return 0.0
    phi = num / den - 1.0
    phi = min(max(phi, 0.05), 1e4)
    return math.log(phi)


@njit
def degenerate(st):
    return False


@njit
def covariances(st, psi1, lam1, psi0, lam0):
    return 0.0, 0.0, 0.0, 0.0
