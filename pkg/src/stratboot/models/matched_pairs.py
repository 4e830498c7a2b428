"""Binomial matched pairs: Bernoulli with logit p = lambda_i + psi * x_j,
x_j = 1 for the first half of each stratum and 0 for the second.

Stratum statistics: ``[m, sum y, sum x y, sum x]`` (x in {0, 1}).
Strata with all-0 or all-1 responses have no finite nuisance estimate and
are flagged degenerate.
"""
import math

from .._jit import njit
from ..rng import uniform
from ._common import expit, log1pexp

NSTAT = 4


@njit
def log_density(y, x, psi, lam):
    eta = lam + psi * x
    if y == 1.0:
        return -log1pexp(-eta)
    if y == 0.0:
        return -log1pexp(eta)
    return -math.inf


@njit
def score(y, x, psi, lam):
    p = expit(lam + psi * x)
    return x * (y - p), y - p


@njit
def observed_info(y, x, psi, lam):
    eta = lam + psi * x
    w = expit(eta) * expit(-eta)
    return x * x * w, x * w, w


@njit
def expected_info(x, psi, lam):
    return observed_info(0.0, x, psi, lam)


@njit
def sample(x, psi, lam, key, ctr):
    u, ctr = uniform(key, ctr)
    return 1.0 if u < expit(lam + psi * x) else 0.0, ctr


@njit
def stats(Y, X, i, m, out):
    sy = 0.0
    sxy = 0.0
    sx = 0.0
    for j in range(m):
        sy += Y[i, j]
        sxy += X[i, j] * Y[i, j]
        sx += X[i, j]
    out[i, 0] = m
    out[i, 1] = sy
    out[i, 2] = sxy
    out[i, 3] = sx


@njit
def psi_consts(psi):
    return 0.0, 0.0, 0.0, 0.0


@njit
def stratum_eval(st, psi, pc, lam):
    m = st[0]
    n1 = st[3]
    n0 = m - n1
    eta1 = lam + psi
    p1 = expit(eta1)
    p0 = expit(lam)
    w1 = p1 * expit(-eta1)
    w0 = p0 * expit(-lam)
    ll = lam * st[1] + psi * st[2] - n1 * log1pexp(eta1) - n0 * log1pexp(lam)
    return (ll, st[2] - n1 * p1, st[1] - n1 * p1 - n0 * p0,
            n1 * w1, n1 * w1, n1 * w1 + n0 * w0)


@njit
def stratum_expected(st, psi, pc, lam):
    ev = stratum_eval(st, psi, pc, lam)
    return ev[3], ev[4], ev[5]


@njit
def lambda_exact(st, psi, pc):
    # with t = e^lam and a = e^psi the score equation is the quadratic
    # a (m - s) t^2 + (a (n1 - s) + n0 - s) t - s = 0, one positive root
    m = st[0]
    s = st[1]
    if s <= 0.0 or s >= m:
        return 0.0, 2
    if abs(psi) > 300.0:
        return 0.0, -1
    n1 = st[3]
    a = math.exp(psi)
    qa = a * (m - s)
    qb = a * (n1 - s) + (m - n1) - s
    root = math.sqrt(qb * qb + 4.0 * qa * s)
    if qb >= 0.0:
        t = 2.0 * s / (qb + root)
    else:
        t = (root - qb) / (2.0 * qa)
    return math.log(t), 0


@njit
def lambda_start(st, psi):
    m = st[0]
    p = (st[1] + 0.5) / (m + 1.0)
    return math.log(p / (1.0 - p)) - psi * st[3] / m


@njit
def psi_start(ST, keep):
    # Mantel-Haenszel log odds ratio with a 1/2 continuity correction
    num = 0.0
    den = 0.0
    for i in range(ST.shape[0]):
        if keep[i]:
            m = ST[i, 0]
            a = ST[i, 2] + 0.5
            b = ST[i, 3] - ST[i, 2] + 0.5
            c = ST[i, 1] - ST[i, 2] + 0.5
            d = (m - ST[i, 3]) - (ST[i, 1] - ST[i, 2]) + 0.5
            num += a * d / m
            den += b * c / m
    return math.log(num / den)


@njit
def degenerate(st):
    return st[1] <= 0.0 or st[1] >= st[0]


@njit
def covariances(st, psi1, lam1, psi0, lam0):
    return 0.0, 0.0, 0.0, 0.0


@njit
def psi_bounded(ST, keep):
    # psi_hat is finite iff sum(x y), given the stratum totals, lies strictly
    # inside its attainable range; otherwise the likelihood is monotone in psi
    t = 0.0
    lo = 0.0
    hi = 0.0
    for i in range(ST.shape[0]):
        if not keep[i]:
            continue
        m = ST[i, 0]
        s = ST[i, 1]
        n1 = ST[i, 3]
        t += ST[i, 2]
        lo += max(0.0, s - (m - n1))
        hi += min(s, n1)
    return lo < t < hi
