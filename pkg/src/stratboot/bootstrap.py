"""Constrained and unconstrained parametric bootstrap.

Unconstrained: replicates are drawn at the full fit theta_hat and each
replicate statistic is evaluated at psi_hat. Constrained: replicates are
drawn at theta_hat_psi0 and evaluated at psi0. In both cases the p-value
is the fraction of successful replicates whose statistic is <= the
observed one at psi0.

Replicate k of a run with root key ``key`` draws from stream
``split(key, k)`` and stratum i within it from ``split(split(key, k), i)``,
so results do not depend on how replicates are spread over workers.
Only retained strata are simulated.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DegenerateSample, TooManyFailures
from .estimation import GRAD_TOL, MAX_ITER, fit_constrained, fit_mle, fit_pair, prepare
from .pivots import MomentAdjustment, pivot_set
from .rng import derive, seed_key

VARIANTS = ("unconstrained", "constrained")
STATISTICS = ("R", "S", "T")
_VARIANT_CODE = {"unconstrained": 1, "constrained": 2}
_COLUMN = {"R": 0, "S": 1, "T": 2}


@dataclass(frozen=True)
class BootstrapPlan:
    """How to run one bootstrap.

    Attributes
    ----------
    variant : {"constrained", "unconstrained"}
    k : int
        Number of replicates.
    seed : int
    statistic : {"R", "S", "T"}
    fail_budget : float
        Largest tolerated fraction of failed replicate refits.
    workers : int
        Threads sharing the replicates; does not affect results.
    """

    variant: str = "constrained"
    k: int = 1000
    seed: int = 0
    statistic: str = "R"
    fail_budget: float = 0.01
    workers: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.statistic.upper() not in STATISTICS:
            raise ValueError(f"statistic must be one of {STATISTICS}")
        if not 0 <= self.fail_budget < 1:
            raise ValueError("fail_budget must lie in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "statistic", self.statistic.upper())

    def root_key(self):
        return derive(seed_key(self.seed), _VARIANT_CODE[self.variant])


@dataclass(frozen=True)
class BootstrapResult:
    """p-value and replicate distribution of one statistic.

    ``replicate_stats`` holds successful replicates in replicate order;
    ``moments`` is None when they have no spread.
    """

    pvalue: float
    replicate_stats: np.ndarray = field(repr=False)
    failures: int
    moments: MomentAdjustment
    observed: float
    variant: str
    statistic: str


@dataclass(frozen=True)
class Replicates:
    """Raw output of one bootstrap run: all pivots for every replicate."""

    stats: np.ndarray = field(repr=False)
    status: np.ndarray = field(repr=False)
    variant: str

    @property
    def ok(self):
        return self.status == K.OK

    @property
    def failures(self):
        return int(np.count_nonzero(~self.ok))

    def column(self, statistic):
        return self.stats[self.ok, _COLUMN[statistic.upper()]]


def pvalue_from(observed, replicates):
    """Fraction of ``replicates`` that are <= ``observed`` (ties count)."""
    rep = np.asarray(replicates, dtype=float)
    if rep.size == 0:
        raise ValueError("no replicates")
    return np.count_nonzero(rep <= observed) / rep.size


def moments_from(replicates, source):
    """Sample mean and standard deviation (divisor K - 1).

    Raises
    ------
    DegenerateSample
        Fewer than two replicates or zero spread.
    """
    rep = np.asarray(replicates, dtype=float)
    if rep.size < 2:
        raise DegenerateSample("need at least two replicates for a standard deviation")
    sd = float(np.std(rep, ddof=1))
    if not sd > 0:
        raise DegenerateSample("replicate statistics have zero spread")
    return MomentAdjustment(float(np.mean(rep)), sd, source)


def simulate_replicates(prep, sim_psi, sim_lam, eval_psi, k, key, workers=1,
                        grad_tol=GRAD_TOL, max_iter=MAX_ITER):
    """Draw ``k`` datasets at (sim_psi, sim_lam) and evaluate R, S, T at ``eval_psi``.

    ``sim_lam`` covers the retained strata of ``prep``. Returns the (k, 3)
    statistics and per-replicate kernel status.
    """
    idx = list(prep.retained)
    X = np.ascontiguousarray(prep.X[idx])
    M = np.ascontiguousarray(prep.M[idx])
    lam = np.ascontiguousarray(sim_lam, dtype=float)
    out = np.full((k, 3), np.nan)
    status = np.zeros(k, dtype=np.int64)
    key = np.uint64(key)

    def block(lo, hi):
        K.bootstrap_block(prep.kind, X, M, float(sim_psi), lam, float(eval_psi), key, lo, hi,
                          grad_tol, max_iter, out, status)

    workers = max(1, min(int(workers), k))
    if workers == 1:
        block(0, k)
    else:
        edges = np.linspace(0, k, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(block, edges[:-1], edges[1:]))
    return out, status


def run(model, data, psi0, variant, k, key, *, full_fit=None, constrained_fit=None,
        workers=1):
    """Bootstrap replicates of all pivots for one variant.

    Returns
    -------
    Replicates
    """
    prep = prepare(model, data)
    if variant == "unconstrained":
        fit = full_fit if full_fit is not None else fit_mle(model, prep)
        eval_psi = fit.psi
    elif variant == "constrained":
        fit = constrained_fit if constrained_fit is not None else fit_constrained(model, prep, psi0)
        eval_psi = float(psi0)
    else:
        raise ValueError(f"variant must be one of {VARIANTS}")
    stats, status = simulate_replicates(prep, fit.psi, fit.theta.lam, eval_psi, int(k), key, workers)
    return Replicates(stats, status, variant)


def summarize(reps, observed, statistic, fail_budget=0.01):
    """Turn replicates into a :class:`BootstrapResult` for one statistic.

    Raises
    ------
    TooManyFailures
    """
    k = reps.status.size
    if reps.failures > math.floor(fail_budget * k + 1e-9):
        raise TooManyFailures(reps.failures, k, fail_budget)
    values = reps.column(statistic)
    try:
        moments = moments_from(values, reps.variant)
    except DegenerateSample:
        moments = None
    return BootstrapResult(float(pvalue_from(observed, values)), values, reps.failures, moments,
                           float(observed), reps.variant, statistic.upper())


def _pvalue(model, data, psi0, plan, variant):
    if plan.variant != variant:
        plan = BootstrapPlan(variant, plan.k, plan.seed, plan.statistic, plan.fail_budget,
                             plan.workers)
    prep = prepare(model, data)
    full, cons = fit_pair(model, prep, psi0)
    observed = pivot_set(model, prep, psi0, full, cons).get(plan.statistic)
    reps = run(model, prep, psi0, variant, plan.k, plan.root_key(), full_fit=full,
               constrained_fit=cons, workers=plan.workers)
    return summarize(reps, observed, plan.statistic, plan.fail_budget)


def unconstrained_pvalue(model, data, psi0, plan):
    """Bootstrap p-value with replicates drawn at the full MLE."""
    return _pvalue(model, data, psi0, plan, "unconstrained")


def constrained_pvalue(model, data, psi0, plan):
    """Bootstrap p-value with replicates drawn at the constrained MLE under psi0."""
    return _pvalue(model, data, psi0, plan, "constrained")


def bootstrap_moments(model, data, psi0, plan):
    """Mean and sd of the plan's statistic over its bootstrap replicates.

    Raises
    ------
    DegenerateSample, TooManyFailures
    """
    res = _pvalue(model, data, psi0, plan, plan.variant)
    if res.moments is None:
        raise DegenerateSample("replicate statistics have zero spread")
    return res.moments
