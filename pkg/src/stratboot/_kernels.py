"""Generic numeric kernels, parametrized by an integer model ``kind``.

Datasets enter as padded arrays ``Y, X`` of shape (q, max m) with stratum
sizes ``M``; fits work on per-stratum sufficient statistics ``ST`` of shape
(q, NSTAT) and a boolean ``keep`` mask. Kernels never raise; they return
an integer status (see ``OK`` and friends) that the Python layer maps to
exceptions.
"""
import math

import numpy as np

from ._jit import njit
from .models import _dispatch as D
from .rng import split

OK = 0
NO_CONVERGENCE = 1
STRATUM_DIVERGED = 2
ALL_DROPPED = 3
NONPOSITIVE_INFO = 4
NEGATIVE_DEVIANCE = 5
NONFINITE = 6
PSI_UNBOUNDED = 7

LAMBDA_ESCAPE = 50.0

assert D.NSTAT == 5
DEVIANCE_SLACK = 1e-6


@njit
def _row(ST, i):
    # stratum statistics travel as a tuple: passing an array view to a
    # non-inlined callee costs a reference-count round trip per call
    return ST[i, 0], ST[i, 1], ST[i, 2], ST[i, 3], ST[i, 4]


@njit
def _not_worse(fnew, f):
    # accept ascent up to floating-point noise in the objective
    return fnew >= f - 1e-12 * (1.0 + abs(f))


@njit
def newton_lambda(kind, st, psi, pc, lam, tol, maxit):
    """Maximize one stratum's log-likelihood over its nuisance parameter.

    Newton with step halving; where the curvature is not negative the step
    follows the score with a doubling length, and once the score has been
    seen with both signs the iterate is kept inside that bracket.
    Returns ``(lam, iterations, status)``.
    """
    lam0 = lam
    ev = D.stratum_eval(kind, st, psi, pc, lam)
    f = ev[0]
    g = ev[2]
    h = ev[5]
    lo = -math.inf
    hi = math.inf
    expand = 1.0
    for it in range(maxit):
        if not (math.isfinite(f) and math.isfinite(g)):
            return lam, it, NONFINITE
        if abs(g) <= tol:
            # one more Newton step: per-stratum residuals add up in the
            # profile score, which is held to the same tolerance
            if h > 0.0:
                evn = D.stratum_eval(kind, st, psi, pc, lam + g / h)
                if abs(evn[2]) < abs(g):
                    return lam + g / h, it + 1, OK
            return lam, it, OK
        if g > 0.0:
            lo = lam
        else:
            hi = lam
        if h > 0.0:
            step = g / h
        else:
            step = expand if g > 0.0 else -expand
            expand *= 2.0
        step = min(max(step, -10.0), 10.0)
        new = lam + step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        accepted = False
        for _ in range(60):
            evn = D.stratum_eval(kind, st, psi, pc, new)
            if math.isfinite(evn[0]) and _not_worse(evn[0], f):
                accepted = True
                break
            new = lam + 0.5 * (new - lam)
        if not accepted:
            return lam, it, NO_CONVERGENCE
        lam = new
        f = evn[0]
        g = evn[2]
        h = evn[5]
        if abs(lam - lam0) > LAMBDA_ESCAPE:
            return lam, it, STRATUM_DIVERGED
    if abs(g) <= tol:
        return lam, maxit, OK
    return lam, maxit, NO_CONVERGENCE


@njit
def fit_lambdas(kind, ST, keep, psi, lam, warm, exact, tol, maxit):
    """Constrained nuisance estimates at ``psi``, written into ``lam``.

    Returns ``(status, offending stratum or -1, newton iterations)``.
    """
    pc = D.psi_consts(kind, psi)
    iters = 0
    for i in range(ST.shape[0]):
        if not keep[i]:
            continue
        if exact:
            value, code = D.lambda_exact(kind, _row(ST, i), psi, pc)
            if code == 0:
                lam[i] = value
                continue
            if code > 0:
                return STRATUM_DIVERGED, i, iters
        start = lam[i] if warm else D.lambda_start(kind, _row(ST, i), psi)
        value, it, code = newton_lambda(kind, _row(ST, i), psi, pc, start, tol, maxit)
        iters += it
        if code != OK:
            return code, i, iters
        lam[i] = value
    return OK, -1, iters


@njit
def profile_terms(kind, ST, keep, psi, lam):
    """(l, U_psi, block-formula observed info, partial expected info) at (psi, lam)."""
    pc = D.psi_consts(kind, psi)
    lp = 0.0
    up = 0.0
    jp = 0.0
    ip = 0.0
    for i in range(ST.shape[0]):
        if not keep[i]:
            continue
        ev = D.stratum_eval(kind, _row(ST, i), psi, pc, lam[i])
        ie = D.stratum_expected(kind, _row(ST, i), psi, pc, lam[i])
        lp += ev[0]
        up += ev[1]
        jp += ev[3] - ev[4] * ev[4] / ev[5]
        ip += ie[0] - ie[1] * ie[1] / ie[2]
    return lp, up, jp, ip


@njit
def profile_at(kind, ST, keep, psi, lam, warm, exact, tol, maxit):
    """Constrained fit at ``psi`` (into ``lam``) fused with (l_p, U_p, j_p).

    Returns ``(status, bad stratum, l_p, U_p, j_p)``.
    """
    pc = D.psi_consts(kind, psi)
    lp = 0.0
    up = 0.0
    jp = 0.0
    for i in range(ST.shape[0]):
        if not keep[i]:
            continue
        solved = False
        if exact:
            value, code = D.lambda_exact(kind, _row(ST, i), psi, pc)
            if code == 0:
                solved = True
            elif code > 0:
                return STRATUM_DIVERGED, i, math.nan, math.nan, math.nan
        if not solved:
            start = lam[i] if warm else D.lambda_start(kind, _row(ST, i), psi)
            value, it, code = newton_lambda(kind, _row(ST, i), psi, pc, start, tol, maxit)
            if code != OK:
                return code, i, math.nan, math.nan, math.nan
        lam[i] = value
        ev = D.stratum_eval(kind, _row(ST, i), psi, pc, value)
        lp += ev[0]
        up += ev[1]
        jp += ev[3] - ev[4] * ev[4] / ev[5]
    return OK, -1, lp, up, jp


@njit
def fit_full(kind, ST, keep, psi, lam, warm, exact, tol, maxit, psi_alt=math.nan):
    """Maximize the profile log-likelihood over psi.

    ``lam`` holds the starting nuisance values when ``warm`` and receives
    the estimates. A finite ``psi_alt`` is a second candidate start; the
    one with the larger profile likelihood wins. Returns
    ``(status, psi, l_p, U_p, j_p, iterations, bad)``.
    """
    if not D.psi_bounded(kind, ST, keep):
        return PSI_UNBOUNDED, psi, math.nan, math.nan, math.nan, 0, -1
    code, bad, lp, up, jp = profile_at(kind, ST, keep, psi, lam, warm, exact, tol, maxit)
    if code != OK:
        return code, psi, math.nan, math.nan, math.nan, 0, bad
    trial = lam.copy()
    if math.isfinite(psi_alt):
        code, _, lpa, upa, jpa = profile_at(kind, ST, keep, psi_alt, trial, warm, exact, tol, maxit)
        if code == OK and lpa > lp:
            psi = psi_alt
            lam[:] = trial
            lp = lpa
            up = upa
            jp = jpa
    lo = -math.inf
    hi = math.inf
    expand = 0.5
    for it in range(maxit):
        if not (math.isfinite(lp) and math.isfinite(up)):
            return NONFINITE, psi, lp, up, jp, it, -1
        if abs(up) <= tol:
            return OK, psi, lp, up, jp, it, -1
        if up > 0.0:
            lo = psi
        else:
            hi = psi
        if jp > 0.0:
            step = up / jp
            cap = max(1.0, 10.0 / math.sqrt(jp))
            step = min(max(step, -cap), cap)
        else:
            step = expand if up > 0.0 else -expand
            expand *= 2.0
        new = psi + step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        accepted = False
        for _ in range(60):
            trial[:] = lam
            code, bad, lpn, upn, jpn = profile_at(kind, ST, keep, new, trial, True, exact, tol, maxit)
            if code == OK and math.isfinite(lpn) and _not_worse(lpn, lp):
                accepted = True
                break
            new = psi + 0.5 * (new - psi)
        if not accepted:
            return NO_CONVERGENCE, psi, lp, up, jp, it, -1
        psi = new
        lam[:] = trial
        lp = lpn
        up = upn
        jp = jpn
    if abs(up) <= tol:
        return OK, psi, lp, up, jp, maxit, -1
    return NO_CONVERGENCE, psi, lp, up, jp, maxit, -1


@njit
def pivots(kind, ST, keep, psi0, psi_hat, lp_hat, jp_hat, lam, warm, exact, tol, maxit):
    """Constrained fit at psi0 into ``lam``, then (status, R, S, T, l(theta_psi0))."""
    code, bad, _ = fit_lambdas(kind, ST, keep, psi0, lam, warm, exact, tol, maxit)
    if code != OK:
        return code, math.nan, math.nan, math.nan, math.nan
    lp, up, jp, ip = profile_terms(kind, ST, keep, psi0, lam)
    dev = lp_hat - lp
    if not math.isfinite(dev):
        return NONFINITE, math.nan, math.nan, math.nan, lp
    if dev < -DEVIANCE_SLACK:
        return NEGATIVE_DEVIANCE, math.nan, math.nan, math.nan, lp
    dev = max(dev, 0.0)
    diff = psi_hat - psi0
    r = math.sqrt(2.0 * dev)
    if diff < 0.0:
        r = -r
    elif diff == 0.0:
        r = 0.0
    if not (ip > 0.0 and jp_hat > 0.0):
        return NONPOSITIVE_INFO, r, math.nan, math.nan, lp
    return OK, r, up / math.sqrt(ip), diff * math.sqrt(jp_hat), lp


@njit
def compute_stats(kind, Y, X, M, ST, keep):
    n_keep = 0
    for i in range(Y.shape[0]):
        D.stats(kind, Y, X, i, M[i], ST)
        keep[i] = not D.degenerate(kind, _row(ST, i))
        if keep[i]:
            n_keep += 1
    return n_keep


@njit
def simulate(kind, X, M, psi, lam, key, Y):
    """Fill ``Y`` with one dataset; stratum i draws from stream split(key, i)."""
    for i in range(Y.shape[0]):
        ki = split(key, i)
        ctr = 0
        for j in range(M[i]):
            Y[i, j], ctr = D.sample(kind, X[i, j], psi, lam[i], ki, ctr)


@njit
def bootstrap_block(kind, X, M, sim_psi, sim_lam, eval_psi, root_key, k0, k1,
                    tol, maxit, out, status):
    """Replicates k0 <= k < k1 of a parametric bootstrap.

    Replicate k is simulated at (sim_psi, sim_lam) from stream
    split(root_key, k); its R, S, T at ``eval_psi`` go to ``out[k]``.
    """
    q = X.shape[0]
    Y = np.empty(X.shape)
    ST = np.zeros((q, D.NSTAT))
    keep = np.zeros(q, dtype=np.bool_)
    lam = np.empty(q)
    lam_c = np.empty(q)
    for k in range(k0, k1):
        simulate(kind, X, M, sim_psi, sim_lam, split(root_key, k), Y)
        if compute_stats(kind, Y, X, M, ST, keep) == 0:
            status[k] = ALL_DROPPED
            continue
        lam[:] = sim_lam
        code, psi_hat, lp, up, jp, it, bad = fit_full(
            kind, ST, keep, sim_psi, lam, True, True, tol, maxit,
            D.psi_start(kind, ST, keep))
        if code != OK:
            status[k] = code
            continue
        lam_c[:] = lam
        code, r, s, t, lpc = pivots(kind, ST, keep, eval_psi, psi_hat, lp, jp,
                                    lam_c, True, True, tol, maxit)
        if code == NEGATIVE_DEVIANCE:
            # the full fit is a local maximum below l_p(eval_psi); ascend from there
            lam[:] = lam_c
            code, psi_hat, lp, up, jp, it, bad = fit_full(
                kind, ST, keep, eval_psi, lam, True, True, tol, maxit, math.nan)
            if code != OK:
                status[k] = code
                continue
            lam_c[:] = lam
            code, r, s, t, lpc = pivots(kind, ST, keep, eval_psi, psi_hat, lp, jp,
                                        lam_c, True, True, tol, maxit)
        status[k] = code
        out[k, 0] = r
        out[k, 1] = s
        out[k, 2] = t


@njit
def observation_totals(kind, Y, X, M, psi, lam, u_lam):
    """Contract-level log-likelihood and U_psi; U_lambda written into ``u_lam``.

    Sums per-observation ``log_density``/``score`` in fixed order.
    """
    ll = 0.0
    u_psi = 0.0
    for i in range(Y.shape[0]):
        acc = 0.0
        for j in range(M[i]):
            ll += D.log_density(kind, Y[i, j], X[i, j], psi, lam[i])
            sp, sl = D.score(kind, Y[i, j], X[i, j], psi, lam[i])
            u_psi += sp
            acc += sl
        u_lam[i] = acc
    return ll, u_psi


@njit
def observation_info(kind, Y, X, M, psi, lam, observed, out):
    """Per-stratum information blocks summed from the observation contract."""
    for i in range(Y.shape[0]):
        a = 0.0
        b = 0.0
        c = 0.0
        for j in range(M[i]):
            if observed:
                e = D.observed_info(kind, Y[i, j], X[i, j], psi, lam[i])
            else:
                e = D.expected_info(kind, X[i, j], psi, lam[i])
            a += e[0]
            b += e[1]
            c += e[2]
        out[i, 0] = a
        out[i, 1] = b
        out[i, 2] = c


@njit
def stratum_blocks(kind, ST, psi, lam, out_obs, out_exp):
    """Fast-path per-stratum observed and expected blocks (all strata)."""
    pc = D.psi_consts(kind, psi)
    for i in range(ST.shape[0]):
        ev = D.stratum_eval(kind, _row(ST, i), psi, pc, lam[i])
        ie = D.stratum_expected(kind, _row(ST, i), psi, pc, lam[i])
        for c in range(6):
            out_obs[i, c] = ev[c]
        for c in range(3):
            out_exp[i, c] = ie[c]


@njit
def analytic_covariances(kind, ST, psi1, lam1, psi0, lam0, out):
    for i in range(ST.shape[0]):
        res = D.covariances(kind, _row(ST, i), psi1, lam1[i], psi0, lam0[i])
        for c in range(4):
            out[i, c] = res[c]


@njit
def mc_covariances(kind, X, M, psi1, lam1, psi0, lam0, key, size, iid, out):
    """Monte Carlo version of ``analytic_covariances``.

    Draws ``size`` observations at (psi1, lam1_i) for every observation slot
    (one slot per stratum, scaled by m, when ``iid``). The first-order parts
    of the moments are known exactly from the expected information i at
    theta1, with delta = theta1 - theta0:

        Cov(d, U1) = i delta + Cov(d - delta'U1, U1)
        E[U1 U0']  = i + Cov(U1, U0 - U1)

    so only the remainders, of order |delta|^2 and |delta|, are sampled.
    """
    dpsi = psi1 - psi0
    for i in range(X.shape[0]):
        ki = split(key, i)
        slots = 1 if iid else M[i]
        dlam = lam1[i] - lam0[i]
        for c in range(4):
            out[i, c] = 0.0
        for j in range(slots):
            kij = split(ki, j)
            x = X[i, j]
            ipp, ipl, ill = D.expected_info(kind, x, psi1, lam1[i])
            ctr = 0
            s_e = 0.0
            s_p = 0.0
            s_l = 0.0
            s_dl = 0.0
            s_ep = 0.0
            s_el = 0.0
            s_p_dl = 0.0
            s_l_dl = 0.0
            for _ in range(size):
                y, ctr = D.sample(kind, x, psi1, lam1[i], kij, ctr)
                d = (D.log_density(kind, y, x, psi1, lam1[i])
                     - D.log_density(kind, y, x, psi0, lam0[i]))
                u1p, u1l = D.score(kind, y, x, psi1, lam1[i])
                u0p, u0l = D.score(kind, y, x, psi0, lam0[i])
                e = d - dpsi * u1p - dlam * u1l
                dl = u0l - u1l
                s_e += e
                s_p += u1p
                s_l += u1l
                s_dl += dl
                s_ep += e * u1p
                s_el += e * u1l
                s_p_dl += u1p * dl
                s_l_dl += u1l * dl
            n = float(size)
            scale = float(M[i]) if iid else 1.0
            out[i, 0] += scale * (ipp * dpsi + ipl * dlam + s_ep / n - (s_e / n) * (s_p / n))
            out[i, 1] += scale * (ipl * dpsi + ill * dlam + s_el / n - (s_e / n) * (s_l / n))
            out[i, 2] += scale * (ipl + s_p_dl / n - (s_p / n) * (s_dl / n))
            out[i, 3] += scale * (ill + s_l_dl / n - (s_l / n) * (s_dl / n))
