"""Stratified gamma with common shape.

psi = log(shape), lambda_i = log(scale_i). Stratum statistics:
``[m, sum log y, sum y]``.
"""
import math

from .._jit import njit
from ..rng import std_gamma
from ..special import digamma, trigamma

NSTAT = 3


@njit
def log_density(y, x, psi, lam):
    if not y > 0.0:
        return -math.inf
    a = math.exp(psi)
    return (a - 1.0) * math.log(y) - math.lgamma(a) - a * lam - y * math.exp(-lam)


@njit
def score(y, x, psi, lam):
    a = math.exp(psi)
    return a * (math.log(y) - digamma(a) - lam), -a + y * math.exp(-lam)


@njit
def observed_info(y, x, psi, lam):
    a = math.exp(psi)
    u_psi = a * (math.log(y) - digamma(a) - lam)
    return a * a * trigamma(a) - u_psi, a, y * math.exp(-lam)


@njit
def expected_info(x, psi, lam):
    a = math.exp(psi)
    return a * a * trigamma(a), a, a


@njit
def sample(x, psi, lam, key, ctr):
    g, ctr = std_gamma(math.exp(psi), key, ctr)
    return g * math.exp(lam), ctr


@njit
def stats(Y, X, i, m, out):
    sl = 0.0
    sy = 0.0
    for j in range(m):
        sl += math.log(Y[i, j])
        sy += Y[i, j]
    out[i, 0] = m
    out[i, 1] = sl
    out[i, 2] = sy


@njit
def psi_consts(psi):
    a = math.exp(psi)
    return a, math.lgamma(a), digamma(a), trigamma(a)


@njit
def stratum_eval(st, psi, pc, lam):
    m = st[0]
    a = pc[0]
    el = math.exp(-lam)
    u_psi = a * (st[1] - m * pc[2] - m * lam)
    ll = (a - 1.0) * st[1] - m * pc[1] - m * a * lam - st[2] * el
    return (ll, u_psi, -m * a + st[2] * el,
            m * a * a * pc[3] - u_psi, m * a, st[2] * el)


@njit
def stratum_expected(st, psi, pc, lam):
    m = st[0]
    a = pc[0]
    return m * a * a * pc[3], m * a, m * a


@njit
def lambda_exact(st, psi, pc):
    return math.log(st[2] / st[0]) - psi, 0


@njit
def lambda_start(st, psi):
    return math.log(st[2] / st[0]) - psi


@njit
def psi_start(ST, keep):
    # Minka's closed-form approximation applied to the pooled
    # log(mean) - mean(log) statistic
    s = 0.0
    n = 0
    for i in range(ST.shape[0]):
        if keep[i]:
            s += math.log(ST[i, 2] / ST[i, 0]) - ST[i, 1] / ST[i, 0]
            n += 1
    s /= n
    if not s > 1e-12:
        return 5.0
    a = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    return math.log(a)


@njit
def degenerate(st):
    return False


@njit
def covariances(st, psi1, lam1, psi0, lam0):
    """Score/likelihood covariances under (psi1, lam1), summed over the stratum.

    Returns (cov(d, U_psi1), cov(d, U_lam1), E[U_psi1 U_lam0], E[U_lam1 U_lam0])
    with d = l(psi1, lam1) - l(psi0, lam0).
    """
    m = st[0]
    a1 = math.exp(psi1)
    a0 = math.exp(psi0)
    b1 = math.exp(lam1)
    e1 = 1.0 / b1
    e0 = math.exp(-lam0)
    tri = trigamma(a1)
    q_psi = m * a1 * ((a1 - a0) * tri - (e1 - e0) * b1)
    q_lam = m * e1 * ((a1 - a0) * b1 - (e1 - e0) * a1 * b1 * b1)
    s_pl = m * a1 * e0 * b1
    s_ll = m * e1 * e0 * a1 * b1 * b1
    return q_psi, q_lam, s_pl, s_ll
