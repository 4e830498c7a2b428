"""Curved exponential family: normal with mean exp(lambda_i) and variance
exp(psi + lambda_i / 2).

Stratum statistics: ``[m, mean y, sum (y - mean)^2]``.
"""
import math

from .._jit import njit
from ..rng import std_normal
from ._common import LOG_2PI

NSTAT = 3


@njit
def log_density(y, x, psi, lam):
    r = y - math.exp(lam)
    v = math.exp(psi + 0.5 * lam)
    return -0.5 * LOG_2PI - 0.5 * (psi + 0.5 * lam) - 0.5 * r * r / v


@njit
def score(y, x, psi, lam):
    t = math.exp(lam)
    v = math.exp(psi + 0.5 * lam)
    r = y - t
    w = r * r / v
    return -0.5 + 0.5 * w, -0.25 + r * t / v + 0.25 * w


@njit
def observed_info(y, x, psi, lam):
    t = math.exp(lam)
    v = math.exp(psi + 0.5 * lam)
    r = y - t
    w = r * r / v
    return 0.5 * w, r * t / v + 0.25 * w, t * t / v + 0.125 * w


@njit
def expected_info(x, psi, lam):
    t = math.exp(lam)
    v = math.exp(psi + 0.5 * lam)
    return 0.5, 0.25, t * t / v + 0.125


@njit
def sample(x, psi, lam, key, ctr):
    z, ctr = std_normal(key, ctr)
    return math.exp(lam) + math.exp(0.5 * (psi + 0.5 * lam)) * z, ctr


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
    return math.exp(psi), 0.0, 0.0, 0.0


@njit
def stratum_eval(st, psi, pc, lam):
    m = st[0]
    t = math.exp(lam)
    v = pc[0] * math.exp(0.5 * lam)
    r1 = m * (st[1] - t)
    big_w = (st[2] + m * (st[1] - t) ** 2) / v
    ll = -0.5 * m * LOG_2PI - 0.5 * m * (psi + 0.5 * lam) - 0.5 * big_w
    return (ll, -0.5 * m + 0.5 * big_w, -0.25 * m + t * r1 / v + 0.25 * big_w,
            0.5 * big_w, t * r1 / v + 0.25 * big_w, m * t * t / v + 0.125 * big_w)


@njit
def stratum_expected(st, psi, pc, lam):
    m = st[0]
    t = math.exp(lam)
    v = pc[0] * math.exp(0.5 * lam)
    return 0.5 * m, 0.25 * m, m * (t * t / v + 0.125)


# Stationary points in s = exp(lambda / 2) solve
#     f(s) = 3 s^4 - 2 ybar s^2 + c s - ybar2 = 0,   c = exp(psi),
# with dl/dlambda of opposite sign to f. f(0) < 0, so local maxima sit
# where f crosses zero upwards; there are one or two of them.

@njit
def _f(s, ybar, ybar2, c):
    s2 = s * s
    return 3.0 * s2 * s2 - 2.0 * ybar * s2 + c * s - ybar2


@njit
def _df(s, ybar, c):
    return 12.0 * s * s * s - 4.0 * ybar * s + c


@njit
def _bisect(lo, hi, ybar, ybar2, c, deriv, rising):
    # root of f (or f') on [lo, hi], monotone there
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = _df(mid, ybar, c) if deriv else _f(mid, ybar, ybar2, c)
        if (val < 0.0) == rising:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit
def lambda_exact(st, psi, pc):
    m = st[0]
    c = pc[0]
    ybar = st[1]
    ybar2 = st[2] / m + ybar * ybar
    if not ybar2 > 0.0:
        return 0.0, 2
    smax = math.sqrt((abs(ybar) + math.sqrt(ybar * ybar + 3.0 * ybar2)) / 3.0) + 1.0
    r1 = -1.0
    r3 = -1.0
    split_point = ybar > 0.0 and _df(math.sqrt(ybar / 9.0), ybar, c) < 0.0
    if not split_point:
        r1 = _bisect(0.0, smax, ybar, ybar2, c, False, True)
    else:
        smid = math.sqrt(ybar / 9.0)
        s1 = _bisect(0.0, smid, ybar, ybar2, c, True, False)
        s2 = _bisect(smid, math.sqrt(ybar / 3.0) + 1.0, ybar, ybar2, c, True, True)
        if _f(s1, ybar, ybar2, c) > 0.0:
            r1 = _bisect(0.0, s1, ybar, ybar2, c, False, True)
        if _f(s2, ybar, ybar2, c) < 0.0:
            r3 = _bisect(s2, max(smax, 2.0 * s2), ybar, ybar2, c, False, True)
    best = 0.0
    best_ll = -math.inf
    for s in (r1, r3):
        if s > 0.0:
            lam = 2.0 * math.log(s)
            ll = stratum_eval(st, psi, pc, lam)[0]
            if ll > best_ll:
                best_ll = ll
                best = lam
    if best_ll == -math.inf:
        return 0.0, 2
    # polish on the lambda scale
    for _ in range(2):
        ev = stratum_eval(st, psi, pc, best)
        if ev[5] > 0.0:
            best += ev[2] / ev[5]
    return best, 0


@njit
def lambda_start(st, psi):
    return math.log(max(st[1], 1e-3))


@njit
def psi_start(ST, keep):
    acc = 0.0
    n = 0
    for i in range(ST.shape[0]):
        if keep[i] and ST[i, 2] > 0.0:
            m = ST[i, 0]
            lam = math.log(max(ST[i, 1], 1e-3))
            acc += math.log(ST[i, 2] / (m - 1.0)) - 0.5 * lam
            n += 1
    if n == 0:
        return 0.0
    return acc / n


@njit
def degenerate(st):
    return False


@njit
def covariances(st, psi1, lam1, psi0, lam0):
    return 0.0, 0.0, 0.0, 0.0
