"""Multi-sample Behrens-Fisher: normal with common mean psi and variance
exp(lambda_i).

Stratum statistics: ``[m, mean y, sum (y - mean)^2]``.
"""
import math

from .._jit import njit
from ..rng import std_normal
from ._common import LOG_2PI

NSTAT = 3


@njit
def log_density(y, x, psi, lam):
    r = y - psi
    return -0.5 * LOG_2PI - 0.5 * lam - 0.5 * r * r * math.exp(-lam)


@njit
def score(y, x, psi, lam):
    e = math.exp(-lam)
    r = y - psi
    return r * e, -0.5 + 0.5 * r * r * e


@njit
def observed_info(y, x, psi, lam):
    e = math.exp(-lam)
    r = y - psi
    return e, r * e, 0.5 * r * r * e


@njit
def expected_info(x, psi, lam):
    return math.exp(-lam), 0.0, 0.5


@njit
def sample(x, psi, lam, key, ctr):
    z, ctr = std_normal(key, ctr)
    return psi + math.exp(0.5 * lam) * z, ctr


@njit
def stats(Y, X, i, m, out):
    mean = 0.0
    for j in range(m):
        mean += Y[i, j]
    mean /= m
    ss = 0.0
    for j in range(m):
        ss += (Y[i, j] - mean) ** 2
    out[i, 0] = m
    out[i, 1] = mean
    out[i, 2] = ss


@njit
def psi_consts(psi):
    return 0.0, 0.0, 0.0, 0.0


@njit
def stratum_eval(st, psi, pc, lam):
    m = st[0]
    e = math.exp(-lam)
    r1 = m * (st[1] - psi)
    r2 = st[2] + m * (st[1] - psi) ** 2
    ll = -0.5 * m * LOG_2PI - 0.5 * m * lam - 0.5 * r2 * e
    return ll, r1 * e, -0.5 * m + 0.5 * r2 * e, m * e, r1 * e, 0.5 * r2 * e


@njit
def stratum_expected(st, psi, pc, lam):
    m = st[0]
    return m * math.exp(-lam), 0.0, 0.5 * m


@njit
def lambda_exact(st, psi, pc):
    r2 = (st[2] + st[0] * (st[1] - psi) ** 2) / st[0]
    if not r2 > 0.0:
        return 0.0, 2
    return math.log(r2), 0


@njit
def lambda_start(st, psi):
    r2 = (st[2] + st[0] * (st[1] - psi) ** 2) / st[0]
    return math.log(max(r2, 1e-300))


@njit
def psi_start(ST, keep):
    num = 0.0
    den = 0.0
    for i in range(ST.shape[0]):
        if keep[i]:
            m = ST[i, 0]
            w = m / max(ST[i, 2] / m, 1e-300)
            num += w * ST[i, 1]
            den += w
    return num / den


@njit
def degenerate(st):
    return False


@njit
def covariances(st, psi1, lam1, psi0, lam0):
    m = st[0]
    delta = psi1 - psi0
    e0 = math.exp(-lam0)
    ratio = math.exp(lam1 - lam0)
    return m * delta * e0, 0.5 * m * (ratio - 1.0), m * delta * e0, 0.5 * m * ratio
