"""Data model and the per-observation model contract.

A :class:`StratifiedDataset` holds q independent strata of observations
(ragged sizes allowed, at least two per stratum) with an optional scalar
covariate per observation. A :class:`ParamPoint` is an interest scalar
``psi`` plus one nuisance value per stratum. Models implement
:class:`StratumModel`; everything downstream is generic over it.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DimensionError, InvalidObservation, NonFiniteDensity


@dataclass(frozen=True, eq=False)
class ParamPoint:
    """Parameter value ``(psi, lam)`` with finite components."""

    psi: float
    lam: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        lam.setflags(write=False)
        psi = float(self.psi)
        if not math.isfinite(psi) or not np.all(np.isfinite(lam)):
            raise ValueError("parameter components must be finite")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "lam", lam)

    @property
    def q(self):
        return self.lam.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ParamPoint):
            return NotImplemented
        return self.psi == other.psi and np.array_equal(self.lam, other.lam)

    def __repr__(self):
        return f"ParamPoint(psi={self.psi!r}, q={self.q})"


class StratifiedDataset:
    """q strata of real observations with optional per-observation covariates.

    Parameters
    ----------
    strata : sequence of array_like
        One 1-d array per stratum, each of length at least 2.
    covariates : sequence of array_like, optional
        Same ragged shape as ``strata``.
    """

    def __init__(self, strata, covariates=None):
        ys = [np.array(s, dtype=float).reshape(-1) for s in strata]
        if not ys:
            raise DimensionError("a dataset needs at least one stratum")
        for i, y in enumerate(ys):
            if y.size < 2:
                raise DimensionError(f"stratum {i + 1} has {y.size} observation(s); at least 2 required")
            if not np.all(np.isfinite(y)):
                raise InvalidObservation(f"stratum {i + 1} contains a non-finite observation")
        xs = None
        if covariates is not None:
            xs = [np.array(c, dtype=float).reshape(-1) for c in covariates]
            if len(xs) != len(ys) or any(x.size != y.size for x, y in zip(xs, ys)):
                raise DimensionError("covariates must match the shape of strata")
            if not all(np.all(np.isfinite(x)) for x in xs):
                raise InvalidObservation("covariates must be finite")
        for a in ys + (xs or []):
            a.setflags(write=False)
        self._strata = tuple(ys)
        self._covariates = None if xs is None else tuple(xs)

    @property
    def strata(self):
        return self._strata

    @property
    def covariates(self):
        return self._covariates

    @property
    def q(self):
        return len(self._strata)

    @property
    def sizes(self):
        return np.array([y.size for y in self._strata], dtype=np.int64)

    @property
    def n(self):
        return int(self.sizes.sum())

    @property
    def balanced(self):
        return len(set(self.sizes.tolist())) == 1

    def padded(self, fill=0.0):
        """Observations as a (q, max m) array plus the size vector."""
        m = self.sizes
        Y = np.full((self.q, int(m.max())), fill)
        for i, y in enumerate(self._strata):
            Y[i, : y.size] = y
        return Y, m

    def padded_covariates(self):
        if self._covariates is None:
            return None
        m = self.sizes
        X = np.zeros((self.q, int(m.max())))
        for i, x in enumerate(self._covariates):
            X[i, : x.size] = x
        return X

    def subset(self, index):
        index = list(index)
        cov = None if self._covariates is None else [self._covariates[i] for i in index]
        return StratifiedDataset([self._strata[i] for i in index], cov)

    @classmethod
    def from_arrays(cls, Y, M, X=None):
        M = np.asarray(M, dtype=np.int64)
        strata = [np.asarray(Y[i, : M[i]]) for i in range(len(M))]
        cov = None if X is None else [np.asarray(X[i, : M[i]]) for i in range(len(M))]
        return cls(strata, cov)

    @classmethod
    def from_csv(cls, path):
        """Read ``stratum,y[,x]`` rows; strata must be labelled 1..q.

        A header row is optional. Row order within a stratum is preserved.
        """
        groups = {}
        has_x = None
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                cells = [c.strip() for c in row]
                if not cells or all(c == "" for c in cells):
                    continue
                if lineno == 1 and cells[0].lower() == "stratum":
                    if cells[1:2] != ["y"] or cells[2:] not in ([], ["x"]):
                        raise DataFormatError("header must be stratum,y[,x]", lineno)
                    continue
                if len(cells) not in (2, 3):
                    raise DataFormatError(f"expected 2 or 3 fields, got {len(cells)}", lineno)
                if has_x is None:
                    has_x = len(cells) == 3
                elif has_x != (len(cells) == 3):
                    raise DataFormatError("inconsistent number of fields", lineno)
                try:
                    label = int(cells[0])
                    vals = [float(c) for c in cells[1:]]
                except ValueError:
                    raise DataFormatError(f"non-numeric field in {row!r}", lineno) from None
                if label < 1:
                    raise DataFormatError(f"stratum label {label} must be >= 1", lineno)
                if not all(math.isfinite(v) for v in vals):
                    raise DataFormatError("non-finite value", lineno)
                groups.setdefault(label, []).append(vals)
        if not groups:
            raise DataFormatError(f"{path}: no data rows")
        q = max(groups)
        missing = sorted(set(range(1, q + 1)) - set(groups))
        if missing:
            raise DataFormatError(f"{path}: strata {missing} have no rows")
        strata = [[v[0] for v in groups[i]] for i in range(1, q + 1)]
        cov = [[v[1] for v in groups[i]] for i in range(1, q + 1)] if has_x else None
        return cls(strata, cov)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stratum", "y"] + (["x"] if self._covariates is not None else []))
            for i, y in enumerate(self._strata):
                for j, v in enumerate(y):
                    row = [i + 1, repr(float(v))]
                    if self._covariates is not None:
                        row.append(repr(float(self._covariates[i][j])))
                    w.writerow(row)

    def __repr__(self):
        return f"StratifiedDataset(q={self.q}, n={self.n})"


class StratumModel:
    """Per-observation contract shared by all stratified models.

    Subclasses bind ``kind`` to a compiled kernel family. All methods are
    pure; instances are immutable after construction.

    Attributes
    ----------
    name : str
    kind : int
        Dispatch code of the kernel family.
    discrete : bool
        Observations are 0/1.
    iid : bool
        Observations within a stratum are identically distributed (no
        covariate enters the density).
    exact_lambda : bool
        Constrained nuisance estimates have a closed/exact solver.
    analytic_expectations : bool
        Likelihood covariances needed by R* are available in closed form.
    """

    name = None
    kind = None
    discrete = False
    iid = True
    exact_lambda = False
    analytic_expectations = False

    def __init__(self, config=None):
        self.config = dict(config or {})

    def _k(self):
        from .models import _dispatch

        return _dispatch

    def log_density(self, y, x, psi, lam):
        return float(self._k().log_density(self.kind, float(y), float(x), float(psi), float(lam)))

    def score(self, y, x, psi, lam):
        a, b = self._k().score(self.kind, float(y), float(x), float(psi), float(lam))
        return float(a), float(b)

    def observed_info(self, y, x, psi, lam):
        a, b, c = self._k().observed_info(self.kind, float(y), float(x), float(psi), float(lam))
        return np.array([[a, b], [b, c]], dtype=float)

    def expected_info(self, x, psi, lam):
        a, b, c = self._k().expected_info(self.kind, float(x), float(psi), float(lam))
        return np.array([[a, b], [b, c]], dtype=float)

    def sample(self, x, psi, lam, rng):
        """One observation drawn with the :class:`~stratboot.rng.Stream` ``rng``."""
        y, rng.counter = self._k().sample(
            self.kind, float(x), float(psi), float(lam), rng.key, rng.counter)
        return float(y)

    def design(self, m):
        """Covariates for a stratum of size ``m`` when the data carry none."""
        return np.zeros(m)

    def check(self, data):
        """Raise :class:`InvalidObservation` if ``data`` violates the model's support."""

    def arrays(self, data):
        """Padded ``(Y, X, M)`` for kernels, after :meth:`check`."""
        self.check(data)
        Y, M = data.padded()
        X = data.padded_covariates()
        if X is None:
            X = np.zeros_like(Y)
            for i, m in enumerate(M):
                X[i, :m] = self.design(int(m))
        return Y, X, M

    def __repr__(self):
        extra = ", ".join(f"{k}={v!r}" for k, v in sorted(self.config.items()))
        return f"{type(self).__name__}({extra})"


def _checked(data, theta):
    if theta.q != data.q:
        raise DimensionError(f"theta has {theta.q} nuisance values, data has {data.q} strata")


def total_loglik(model, data, theta):
    """Sum of per-observation log-densities at ``theta``.

    Raises
    ------
    DimensionError
        ``theta`` and ``data`` disagree on q.
    NonFiniteDensity
        The result is not finite (parameter/observation pair invalid).
    """
    from . import _kernels as K

    _checked(data, theta)
    Y, X, M = model.arrays(data)
    u_lam = np.empty(data.q)
    ll, _ = K.observation_totals(model.kind, Y, X, M, theta.psi, theta.lam, u_lam)
    if not math.isfinite(ll):
        raise NonFiniteDensity(f"log-likelihood is {ll} at psi={theta.psi!r}")
    return float(ll)


def total_score(model, data, theta):
    """``(U_psi, U_lambda)``; ``U_lambda[i]`` only involves stratum i."""
    from . import _kernels as K

    _checked(data, theta)
    Y, X, M = model.arrays(data)
    u_lam = np.empty(data.q)
    ll, u_psi = K.observation_totals(model.kind, Y, X, M, theta.psi, theta.lam, u_lam)
    if not (math.isfinite(ll) and math.isfinite(u_psi) and np.all(np.isfinite(u_lam))):
        raise NonFiniteDensity(f"score is not finite at psi={theta.psi!r}")
    return float(u_psi), u_lam


def information_blocks(model, data, theta, observed=True):
    """Per-stratum ``(i_psipsi, i_psilam, i_lamlam)`` rows, shape (q, 3).

    Observed blocks sum minus second derivatives over observations;
    expected blocks sum the per-observation expected information.
    """
    from . import _kernels as K

    _checked(data, theta)
    Y, X, M = model.arrays(data)
    out = np.empty((data.q, 3))
    K.observation_info(model.kind, Y, X, M, theta.psi, theta.lam, bool(observed), out)
    return out
