"""Integer-tagged dispatch onto the model kernels.

Every generic kernel takes a ``kind`` code and calls through these
functions, so the whole kernel set compiles once and caches on disk.
A new model needs a module with the same function names and a branch
in each dispatcher below.
"""
from .._jit import njit
from . import gamma, beta, curved_normal, behrens_fisher, matched_pairs

GAMMA = 0
BETA = 1
CURVED_NORMAL = 2
BEHRENS_FISHER = 3
MATCHED_PAIRS = 4

NSTAT = max(gamma.NSTAT, beta.NSTAT, curved_normal.NSTAT, behrens_fisher.NSTAT, matched_pairs.NSTAT)
HAS_EXACT_LAMBDA = (True, False, True, True, True)
HAS_ANALYTIC_COVARIANCES = (True, False, False, True, False)


@njit
def log_density(kind, y, x, psi, lam):
    if kind == GAMMA:
        return gamma.log_density(y, x, psi, lam)
    elif kind == BETA:
        return beta.log_density(y, x, psi, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.log_density(y, x, psi, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.log_density(y, x, psi, lam)
    return matched_pairs.log_density(y, x, psi, lam)


@njit
def score(kind, y, x, psi, lam):
    if kind == GAMMA:
        return gamma.score(y, x, psi, lam)
    elif kind == BETA:
        return beta.score(y, x, psi, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.score(y, x, psi, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.score(y, x, psi, lam)
    return matched_pairs.score(y, x, psi, lam)


@njit
def observed_info(kind, y, x, psi, lam):
    if kind == GAMMA:
        return gamma.observed_info(y, x, psi, lam)
    elif kind == BETA:
        return beta.observed_info(y, x, psi, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.observed_info(y, x, psi, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.observed_info(y, x, psi, lam)
    return matched_pairs.observed_info(y, x, psi, lam)


@njit
def expected_info(kind, x, psi, lam):
    if kind == GAMMA:
        return gamma.expected_info(x, psi, lam)
    elif kind == BETA:
        return beta.expected_info(x, psi, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.expected_info(x, psi, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.expected_info(x, psi, lam)
    return matched_pairs.expected_info(x, psi, lam)


@njit
def sample(kind, x, psi, lam, key, ctr):
    if kind == GAMMA:
        return gamma.sample(x, psi, lam, key, ctr)
    elif kind == BETA:
        return beta.sample(x, psi, lam, key, ctr)
    elif kind == CURVED_NORMAL:
        return curved_normal.sample(x, psi, lam, key, ctr)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.sample(x, psi, lam, key, ctr)
    return matched_pairs.sample(x, psi, lam, key, ctr)


@njit
def stats(kind, Y, X, i, m, out):
    if kind == GAMMA:
        return gamma.stats(Y, X, i, m, out)
    elif kind == BETA:
        return beta.stats(Y, X, i, m, out)
    elif kind == CURVED_NORMAL:
        return curved_normal.stats(Y, X, i, m, out)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.stats(Y, X, i, m, out)
    return matched_pairs.stats(Y, X, i, m, out)


@njit
def psi_consts(kind, psi):
    if kind == GAMMA:
        return gamma.psi_consts(psi)
    elif kind == BETA:
        return beta.psi_consts(psi)
    elif kind == CURVED_NORMAL:
        return curved_normal.psi_consts(psi)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.psi_consts(psi)
    return matched_pairs.psi_consts(psi)


@njit
def stratum_eval(kind, st, psi, pc, lam):
    if kind == GAMMA:
        return gamma.stratum_eval(st, psi, pc, lam)
    elif kind == BETA:
        return beta.stratum_eval(st, psi, pc, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.stratum_eval(st, psi, pc, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.stratum_eval(st, psi, pc, lam)
    return matched_pairs.stratum_eval(st, psi, pc, lam)


@njit
def stratum_expected(kind, st, psi, pc, lam):
    if kind == GAMMA:
        return gamma.stratum_expected(st, psi, pc, lam)
    elif kind == BETA:
        return beta.stratum_expected(st, psi, pc, lam)
    elif kind == CURVED_NORMAL:
        return curved_normal.stratum_expected(st, psi, pc, lam)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.stratum_expected(st, psi, pc, lam)
    return matched_pairs.stratum_expected(st, psi, pc, lam)


@njit
def lambda_exact(kind, st, psi, pc):
    if kind == GAMMA:
        return gamma.lambda_exact(st, psi, pc)
    elif kind == BETA:
        return beta.lambda_exact(st, psi, pc)
    elif kind == CURVED_NORMAL:
        return curved_normal.lambda_exact(st, psi, pc)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.lambda_exact(st, psi, pc)
    return matched_pairs.lambda_exact(st, psi, pc)


@njit
def lambda_start(kind, st, psi):
    if kind == GAMMA:
        return gamma.lambda_start(st, psi)
    elif kind == BETA:
        return beta.lambda_start(st, psi)
    elif kind == CURVED_NORMAL:
        return curved_normal.lambda_start(st, psi)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.lambda_start(st, psi)
    return matched_pairs.lambda_start(st, psi)


@njit
def psi_start(kind, ST, keep):
    if kind == GAMMA:
        return gamma.psi_start(ST, keep)
    elif kind == BETA:
        return beta.psi_start(ST, keep)
    elif kind == CURVED_NORMAL:
        return curved_normal.psi_start(ST, keep)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.psi_start(ST, keep)
    return matched_pairs.psi_start(ST, keep)


@njit
def psi_bounded(kind, ST, keep):
    """False when the likelihood is monotone in psi (no finite maximizer)."""
    if kind == MATCHED_PAIRS:
        return matched_pairs.psi_bounded(ST, keep)
    return True


@njit
def degenerate(kind, st):
    if kind == GAMMA:
        return gamma.degenerate(st)
    elif kind == BETA:
        return beta.degenerate(st)
    elif kind == CURVED_NORMAL:
        return curved_normal.degenerate(st)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.degenerate(st)
    return matched_pairs.degenerate(st)


@njit
def covariances(kind, st, psi1, lam1, psi0, lam0):
    if kind == GAMMA:
        return gamma.covariances(st, psi1, lam1, psi0, lam0)
    elif kind == BETA:
        return beta.covariances(st, psi1, lam1, psi0, lam0)
    elif kind == CURVED_NORMAL:
        return curved_normal.covariances(st, psi1, lam1, psi0, lam0)
    elif kind == BEHRENS_FISHER:
        return behrens_fisher.covariances(st, psi1, lam1, psi0, lam0)
    return matched_pairs.covariances(st, psi1, lam1, psi0, lam0)
