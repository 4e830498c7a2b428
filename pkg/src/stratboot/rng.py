"""Counter-based splittable random streams.

A stream is a pair ``(key, counter)``. The ``n``-th 64-bit word of a stream
is ``mix64(key + (n + 1) * GOLDEN)``, i.e. SplitMix64 with random access, so
any draw can be recomputed from its coordinates alone. Child streams are
obtained by hashing ``(key, index)`` with :func:`split`, which is how
replicate ``r`` of a study, bootstrap sample ``k`` of that replicate and
stratum ``i`` of that sample each get an independent, order-free stream.

Kernel-level samplers take ``(key, ctr)`` and return ``(value, ctr)``.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SPLIT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@njit
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def split(key, index):
    """Key of child stream ``index`` of ``key``."""
    return mix64(mix64(np.uint64(key) ^ _SPLIT) + (np.uint64(index) + _ONE) * GOLDEN)


@njit
def word(key, ctr):
    return mix64(np.uint64(key) + (np.uint64(ctr) + _ONE) * GOLDEN)


@njit
def uniform(key, ctr):
    """Uniform on the open interval (0, 1)."""
    w = word(key, ctr)
    return ((w >> _S11) + 0.5) * _TWO_M53, ctr + 1


if not USE_NUMBA:
    # numpy warns on wrapping uint64 scalar arithmetic; wrapping is the point.
    def _quiet(func):
        def wrapper(*args):
            with np.errstate(over="ignore"):
                return func(*args)

        wrapper.__wrapped__ = func
        wrapper.__name__ = func.__name__
        return wrapper

    mix64 = _quiet(mix64)
    split = _quiet(split)
    word = _quiet(word)
    uniform = _quiet(uniform)


@njit
def std_normal(key, ctr):
    # Marsaglia polar method; the second variate is discarded so every draw
    # depends only on its own counter range.
    while True:
        u1, ctr = uniform(key, ctr)
        u2, ctr = uniform(key, ctr)
        v1 = 2.0 * u1 - 1.0
        v2 = 2.0 * u2 - 1.0
        s = v1 * v1 + v2 * v2
        if 0.0 < s < 1.0:
            return v1 * math.sqrt(-2.0 * math.log(s) / s), ctr


@njit
def std_exponential(key, ctr):
    u, ctr = uniform(key, ctr)
    return -math.log(u), ctr


@njit
def _gamma_mt(a, key, ctr):
    # Marsaglia-Tsang squeeze/rejection, valid for a >= 1.
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x, ctr = std_normal(key, ctr)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u, ctr = uniform(key, ctr)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v, ctr
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v, ctr


@njit
def std_gamma(a, key, ctr):
    """Gamma(shape=a, scale=1) variate."""
    if a >= 1.0:
        return _gamma_mt(a, key, ctr)
    g, ctr = _gamma_mt(a + 1.0, key, ctr)
    u, ctr = uniform(key, ctr)
    return g * u ** (1.0 / a), ctr


@njit
def log_std_gamma(a, key, ctr):
    """Logarithm of a Gamma(a, 1) variate, without underflow for tiny a."""
    if a >= 1.0:
        g, ctr = _gamma_mt(a, key, ctr)
        return math.log(g), ctr
    g, ctr = _gamma_mt(a + 1.0, key, ctr)
    u, ctr = uniform(key, ctr)
    return math.log(g) + math.log(u) / a, ctr


def seed_key(seed):
    """Root key for an integer seed (any Python int; reduced mod 2**64)."""
    with np.errstate(over="ignore"):
        return np.uint64(mix64(np.uint64(int(seed) & _MASK64) ^ np.uint64(0x5851F42D4C957F2D)))


def derive(key, *path):
    """Follow :func:`split` along ``path``."""
    key = np.uint64(key)
    for index in path:
        # compiled functions box uint64 results as Python ints; re-wrap so
        # keys above 2**63 are not retyped as int64 on the next call
        key = np.uint64(split(key, np.uint64(int(index) & _MASK64)))
    return key


class Stream:
    """Python handle on a counter-based stream.

    Used by the per-observation model contract (``model.sample``) and by
    the seeded recipes for true parameter values. Kernels use raw
    ``(key, ctr)`` pairs instead.
    """

    def __init__(self, seed=0, *, key=None, counter=0):
        self.key = np.uint64(key) if key is not None else seed_key(seed)
        self.counter = int(counter)

    def split(self, index):
        return Stream(key=derive(self.key, index))

    def uniform(self):
        u, self.counter = uniform(self.key, self.counter)
        return float(u)

    def normal(self):
        z, self.counter = std_normal(self.key, self.counter)
        return float(z)

    def exponential(self):
        e, self.counter = std_exponential(self.key, self.counter)
        return float(e)

    def gamma(self, shape):
        g, self.counter = std_gamma(float(shape), self.key, self.counter)
        return float(g)

    def __repr__(self):
        return f"Stream(key=0x{int(self.key):016x}, counter={self.counter})"
