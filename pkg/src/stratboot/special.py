"""Special functions used by the gamma and beta likelihoods.

digamma and trigamma use upward recurrence to x >= 10 followed by the
asymptotic (Bernoulli) series; digamma switches to a Taylor series about
its positive root so that relative accuracy survives near the zero.
log_gamma defers to the C library; log_beta avoids the cancellation of
``lgamma(a) + lgamma(b) - lgamma(a + b)`` when either argument is large.
"""
import math

import numpy as np

from ._jit import njit

_LN_SQRT_2PI = 0.9189385332046727417803297

# positive root of digamma, split into hi + lo parts
_X0_HI = 1.4616321449683622
_X0_LO = 9.549995429965697e-17
# digamma(x0 + h) = sum_k _ROOT_SERIES[k-1] * h**k,  coef = (-1)^(k+1) zeta(k+1, x0)
_ROOT_SERIES = np.array([
    0.9676722454476212, -0.4427631689835921, 0.258499760955651,
    -0.16394270544240652, 0.10782405069126237, -0.07219956125645471,
    0.04880428816414311, -0.03316112647484736, 0.022597648232218104,
    -0.01542476590494896, 0.010538791616612175, -0.007204534386356869,
    0.004926781395729853, -0.003369801655439328, 0.002305126326734928,
    -0.0015769367714301972, 0.0010788252019162967, -0.0007380709389960052,
    0.000504953265834602, -0.0003454680251063077,
])


@njit
def log_gamma(x):
    if not x > 0.0:
        raise ValueError("log_gamma: argument must be positive")
    return math.lgamma(x)


@njit
def _digamma_asym(x):
    z = 1.0 / (x * x)
    tail = z * (1.0 / 12.0 - z * (1.0 / 120.0 - z * (1.0 / 252.0 - z * (
        1.0 / 240.0 - z * (1.0 / 132.0 - z * (691.0 / 32760.0 - z / 12.0))))))
    return math.log(x) - 0.5 / x - tail


@njit
def digamma(x):
    if not x > 0.0:
        raise ValueError("digamma: argument must be positive")
    h = x - _X0_HI - _X0_LO
    if abs(h) < 0.1:
        acc = 0.0
        for k in range(_ROOT_SERIES.shape[0] - 1, -1, -1):
            acc = acc * h + _ROOT_SERIES[k]
        return acc * h
    shift = 0.0
    while x < 10.0:
        shift += 1.0 / x
        x += 1.0
    return _digamma_asym(x) - shift


@njit
def trigamma(x):
    if not x > 0.0:
        raise ValueError("trigamma: argument must be positive")
    shift = 0.0
    while x < 10.0:
        shift += 1.0 / (x * x)
        x += 1.0
    z = 1.0 / (x * x)
    tail = z * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (
        1.0 / 30.0 - z * (5.0 / 66.0 - z * (691.0 / 2730.0 - z * 7.0 / 6.0))))))
    return shift + 1.0 / x + 0.5 * z + tail / x


@njit
def _lgamma_corr(x):
    # lgamma(x) - [(x - 1/2) log x - x + log sqrt(2 pi)], x >= 10
    z = 1.0 / (x * x)
    return (1.0 / 12.0 - z * (1.0 / 360.0 - z * (1.0 / 1260.0 - z * (
        1.0 / 1680.0 - z * (1.0 / 1188.0 - z * (691.0 / 360360.0 - z * (
            1.0 / 156.0 - z * 3617.0 / 122400.0))))))) / x


@njit
def log_beta(a, b):
    if not (a > 0.0 and b > 0.0):
        raise ValueError("log_beta: arguments must be positive")
    p = min(a, b)
    q = max(a, b)
    if p >= 10.0:
        corr = _lgamma_corr(p) + _lgamma_corr(q) - _lgamma_corr(p + q)
        return (-0.5 * math.log(q) + _LN_SQRT_2PI + corr
                + (p - 0.5) * math.log(p / (p + q)) + q * math.log1p(-p / (p + q)))
    if q >= 10.0:
        corr = _lgamma_corr(q) - _lgamma_corr(p + q)
        return (math.lgamma(p) + corr + p - p * math.log(p + q)
                + (q - 0.5) * math.log1p(-p / (p + q)))
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)
