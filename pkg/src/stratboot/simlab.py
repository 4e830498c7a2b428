"""Monte Carlo laboratory: calibration experiments for the pivots and bootstraps.

An experiment draws ``n_reps`` datasets at a true parameter, evaluates the
requested statistics on each and tabulates how often their normal-scale
p-values fall at or below nominal levels. Replicate ``r`` draws its data
from stream ``(seed, r, 0)``; its unconstrained and constrained bootstraps
use ``(seed, r, 1)`` and ``(seed, r, 2)`` and its R* moments ``(seed, r, 3)``.
Every replicate is self-contained, so results are identical for any number
of workers.

Statistic names
---------------
``R``, ``S``, ``T``, ``Rstar``
    First-order pivots and the modified root; p-value Phi(value).
``Xu``, ``Xc`` for X in R, S, T
    Unconstrained / constrained bootstrap p-value of X; value is its
    normal score.
``Xl_c``, ``Xls_c``, ``Xl_u``, ``Xls_u``
    X adjusted for location (``l``) or location and scale (``ls``) with
    moments of the constrained (``_c``) or unconstrained (``_u``) bootstrap.
"""
import csv
import gzip
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from . import bootstrap as B
from ._jit import BACKEND
from .errors import ConfigError, StratbootError
from .estimation import Prepared, fit_pair
from .higher_order import RStarOptions, rstar
from .model_api import StratifiedDataset
from .models import build, default_truths
from .pivots import adjust, normal_pvalue, normal_score, pivot_set
from .rng import derive, seed_key

DEFAULT_LEVELS = (1.0, 2.5, 5.0, 95.0, 97.5, 99.0)
DEFAULT_STATISTICS = ("R", "Rstar", "Ru", "Rc", "Rl_c", "Rls_c")
ARCHIVE_COLUMNS = ("replicate", "statistic", "value", "pvalue", "variant")
REPORT_COLUMNS = ("model", "q", "m", "statistic", "level", "freq", "se", "n_eff")


def _catalog():
    names = {"Rstar": ("normal", None, None)}
    for x in ("R", "S", "T"):
        names[x] = ("normal", x, None)
        names[x + "u"] = ("unconstrained", x, "pvalue")
        names[x + "c"] = ("constrained", x, "pvalue")
        for tag, variant in (("c", "constrained"), ("u", "unconstrained")):
            names[f"{x}l_{tag}"] = (variant, x, "location")
            names[f"{x}ls_{tag}"] = (variant, x, "location_scale")
    return names


STATISTICS = _catalog()


@dataclass(frozen=True)
class ExperimentSpec:
    """One simulation experiment.

    Attributes
    ----------
    model : str
    q, m : int
        Number of strata and (balanced) stratum size.
    n_reps : int
        Simulated datasets.
    k_bootstrap : int
        Bootstrap replicates per dataset and variant.
    seed : int
        Seeds both the true nuisance values and all replicate streams.
    statistics : tuple of str
        Names from the module docstring.
    levels : tuple of float
        Nominal levels in percent, strictly increasing inside (0, 100).
    config : dict
        Model configuration passed to :func:`stratboot.models.build`.
    psi0 : float, optional
        Hypothesized value; defaults to the true psi.
    fail_budget : float
        Largest tolerated fraction of failed replicates per statistic.
    bootstrap_fail_budget : float
        Largest tolerated fraction of failed refits within one bootstrap.
    mc_size : int
        Monte Carlo size for R* moments when they are not analytic.
    """

    model: str
    q: int
    m: int
    n_reps: int = 10000
    k_bootstrap: int = 1000
    seed: int = 0
    statistics: tuple = DEFAULT_STATISTICS
    levels: tuple = DEFAULT_LEVELS
    config: dict = field(default_factory=dict)
    psi0: float = None
    fail_budget: float = 0.005
    bootstrap_fail_budget: float = 0.01
    mc_size: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "statistics", tuple(self.statistics))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        object.__setattr__(self, "config", dict(self.config))
        for name in ("q", "m", "n_reps", "k_bootstrap"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        lv = self.levels
        if not lv or any(not 0 < v < 100 for v in lv) or any(a >= b for a, b in zip(lv, lv[1:])):
            raise ConfigError("levels must be strictly increasing inside (0, 100)")
        unknown = [s for s in self.statistics if s not in STATISTICS]
        if unknown or not self.statistics:
            raise ConfigError(f"unknown statistics {unknown}; choose from {sorted(STATISTICS)}")
        if len(set(self.statistics)) != len(self.statistics):
            raise ConfigError("statistics must not repeat")
        if not 0 <= self.fail_budget < 1 or not 0 <= self.bootstrap_fail_budget < 1:
            raise ConfigError("failure budgets must lie in [0, 1)")
        build(self.model, self.config)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown experiment keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        d = asdict(self)
        d["statistics"] = list(self.statistics)
        d["levels"] = list(self.levels)
        return d

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def spec_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ExperimentSpec.from_dict(d)


@dataclass(frozen=True)
class TailRow:
    statistic: str
    level: float
    freq: float
    se: float
    n_eff: int


@dataclass
class TailReport:
    """Empirical tail frequencies (percent) of normal-scale p-values.

    ``freq`` at level l is 100 times the fraction of successful replicates
    with p-value <= l/100, so a calibrated statistic reads l at every
    level; ``se`` is its binomial standard error.
    """

    model: str
    q: int
    m: int
    levels: tuple
    statistics: tuple
    rows: list
    failures: dict
    metadata: dict = field(default_factory=dict)

    def freq(self, statistic, level):
        return self._row(statistic, level).freq

    def se(self, statistic, level):
        return self._row(statistic, level).se

    def _row(self, statistic, level):
        for row in self.rows:
            if row.statistic == statistic and row.level == float(level):
                return row
        raise KeyError((statistic, level))

    def frequencies(self, statistic):
        return [self.freq(statistic, lv) for lv in self.levels]

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in self.rows:
            w.writerow([self.model, self.q, self.m, row.statistic, repr(row.level),
                        repr(row.freq), repr(row.se), row.n_eff])
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())

    def render(self):
        """Aligned text table, one row per statistic, frequencies to 1 decimal."""
        head = f"{self.model}  q={self.q}  m={self.m}"
        width = max([9] + [len(s) for s in self.statistics]) + 2
        cols = "".join(f"{lv:>7g}" for lv in self.levels)
        lines = [head, f"{'':<{width}}{cols}"]
        for stat in self.statistics:
            cells = "".join(f"{format_freq(self.freq(stat, lv)):>7}" for lv in self.levels)
            lines.append(f"{stat:<{width}}{cells}")
        return "\n".join(lines)


def format_freq(value):
    """One-decimal rendering used by report tables (e.g. 94.96 -> '95.0')."""
    if not math.isfinite(value):
        return "nan"
    return f"{value:.1f}"


@dataclass(frozen=True)
class MomentDiagnostic:
    """Empirical mean and variance of a statistic with standard errors."""

    statistic: str
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n: int
    failures: int


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    report: TailReport
    archive: list
    failures: dict
    budget_breached: bool
    runtime: float


def _needs(statistics):
    variants = set()
    rstar_needed = False
    for name in statistics:
        variant, _, _ = STATISTICS[name]
        if name == "Rstar":
            rstar_needed = True
        elif variant != "normal":
            variants.add(variant)
    return variants, rstar_needed


class _Runner:
    """Per-experiment constants shared by the replicate tasks."""

    def __init__(self, spec):
        self.spec = spec
        self.model = build(spec.model, spec.config)
        self.truth = default_truths(spec.model, spec.q, spec.seed)
        self.psi0 = self.truth.psi if spec.psi0 is None else float(spec.psi0)
        self.root = seed_key(spec.seed)
        X = np.zeros((spec.q, spec.m))
        X[:] = self.model.design(spec.m)
        self.X = X
        self.M = np.full(spec.q, spec.m, dtype=np.int64)
        self.lam = np.array(self.truth.lam)
        self.variants, self.rstar_needed = _needs(spec.statistics)

    def dataset(self, r):
        Y = np.empty_like(self.X)
        K.simulate(self.model.kind, self.X, self.M, self.truth.psi, self.lam,
                   derive(self.root, r, 0), Y)
        return StratifiedDataset.from_arrays(Y, self.M)

    def replicate(self, r):
        """{statistic: (value, pvalue)} for replicate r; failures map to NaN."""
        spec = self.spec
        nan = (math.nan, math.nan)
        out = {name: nan for name in spec.statistics}
        try:
            prep = Prepared(self.model, self.dataset(r))
            full, cons = fit_pair(self.model, prep, self.psi0)
            piv = pivot_set(self.model, prep, self.psi0, full, cons)
        except StratbootError:
            return out
        for name in ("R", "S", "T"):
            if name in out:
                v = piv.get(name)
                out[name] = (v, normal_pvalue(v))
        if self.rstar_needed:
            try:
                opts = RStarOptions(mc_size=spec.mc_size, key=derive(self.root, r, 3))
                v = rstar(self.model, prep, self.psi0, full, cons, opts).rstar
                out["Rstar"] = (v, normal_pvalue(v))
            except (StratbootError, ArithmeticError):
                pass
        for variant in sorted(self.variants):
            code = 1 if variant == "unconstrained" else 2
            reps = B.run(self.model, prep, self.psi0, variant, spec.k_bootstrap,
                         derive(self.root, r, code), full_fit=full, constrained_fit=cons)
            for name in spec.statistics:
                v_name, base, kind = STATISTICS[name]
                if v_name != variant:
                    continue
                try:
                    res = B.summarize(reps, piv.get(base), base, spec.bootstrap_fail_budget)
                except StratbootError:
                    continue
                if kind == "pvalue":
                    out[name] = (normal_score(res.pvalue), res.pvalue)
                elif res.moments is not None:
                    v = adjust(piv.get(base), res.moments, kind)
                    out[name] = (v, normal_pvalue(v))
        return out


def _map_ordered(func, n, workers):
    if workers <= 1:
        return [func(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n), chunksize=1))


def run_experiment(spec, workers=1):
    """Run an experiment and tabulate tail frequencies.

    Returns
    -------
    ExperimentResult
        ``budget_breached`` is set when some statistic failed on more than
        ``spec.fail_budget`` of the replicates.
    """
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    runner = _Runner(spec)
    t0 = time.perf_counter()
    results = _map_ordered(runner.replicate, spec.n_reps, int(workers))
    runtime = time.perf_counter() - t0
    archive = []
    for r, res in enumerate(results):
        for name in spec.statistics:
            value, pvalue = res[name]
            archive.append((r, name, float(value), float(pvalue), STATISTICS[name][0]))
    report = tail_report(archive, spec.model, spec.q, spec.m, spec.levels, spec.statistics)
    breached = budget_breached(report.failures, spec.n_reps, spec.fail_budget)
    report.metadata = {
        "spec_hash": spec.spec_hash(),
        "seed": spec.seed,
        "n_reps": spec.n_reps,
        "k_bootstrap": spec.k_bootstrap,
        "workers": int(workers),
        "backend": BACKEND,
        "runtime_seconds": runtime,
        "failures": report.failures,
        "budget_breached": breached,
    }
    return ExperimentResult(spec, report, archive, report.failures, breached, runtime)


def budget_breached(failures, n_reps, budget):
    return any(f > budget * n_reps + 1e-9 for f in failures.values())


def tail_report(archive, model, q, m, levels=DEFAULT_LEVELS, statistics=None):
    """Tail frequencies recomputed from archive rows.

    Rows with a NaN p-value count as failures and are excluded from n_eff.
    """
    if statistics is None:
        statistics = []
        for row in archive:
            if row[1] not in statistics:
                statistics.append(row[1])
    pvals = {name: [] for name in statistics}
    failures = {name: 0 for name in statistics}
    for _, name, _, pvalue, _ in archive:
        if name not in pvals:
            continue
        if math.isnan(pvalue):
            failures[name] += 1
        else:
            pvals[name].append(pvalue)
    rows = []
    for name in statistics:
        p = np.asarray(pvals[name], dtype=float)
        n = p.size
        for lv in levels:
            if n:
                f = np.count_nonzero(p <= lv / 100.0) / n
                freq, se = 100.0 * f, 100.0 * math.sqrt(f * (1.0 - f) / n)
            else:
                freq, se = math.nan, math.nan
            rows.append(TailRow(name, float(lv), float(freq), float(se), int(n)))
    return TailReport(model, int(q), int(m), tuple(float(v) for v in levels), tuple(statistics),
                      rows, failures)


def write_archive(path, archive):
    """gzip-compressed CSV, byte-reproducible (no timestamp in the header)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ARCHIVE_COLUMNS)
    for r, name, value, pvalue, variant in archive:
        w.writerow([r, name, repr(value), repr(pvalue), variant])
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(buf.getvalue().encode("utf-8"))


def read_archive(path):
    with gzip.open(path, "rt", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != ARCHIVE_COLUMNS:
            raise ValueError(f"{path}: not a replicate archive")
        return [(int(r), name, float(v), float(p), variant) for r, name, v, p, variant in reader]


def moment_diagnostic(model, theta0, q, m, statistic, n_reps, seed, workers=1, psi0=None):
    """Empirical mean and variance of a first-order statistic under ``theta0``.

    Parameters
    ----------
    model : str or StratumModel
    theta0 : ParamPoint
        True parameter; ``theta0.lam`` must have length ``q``.
    statistic : {"R", "S", "T", "Rstar"}
    psi0 : float, optional
        Hypothesized value (defaults to ``theta0.psi``).
    """
    if statistic not in ("R", "S", "T", "Rstar"):
        raise ConfigError("moment_diagnostic supports R, S, T and Rstar")
    name = model if isinstance(model, str) else model.name
    config = {} if isinstance(model, str) else model.config
    spec = ExperimentSpec(name, q, m, n_reps=n_reps, k_bootstrap=1, seed=seed,
                          statistics=(statistic,), config=config,
                          psi0=theta0.psi if psi0 is None else psi0)
    runner = _Runner(spec)
    if theta0.q != q:
        raise ConfigError("theta0 must have one nuisance value per stratum")
    runner.truth = theta0
    runner.lam = np.array(theta0.lam)
    results = _map_ordered(runner.replicate, n_reps, int(workers))
    x = np.array([res[statistic][0] for res in results], dtype=float)
    ok = x[np.isfinite(x)]
    n = ok.size
    if n < 2:
        raise StratbootError("fewer than two successful replicates")
    mean = float(np.mean(ok))
    var = float(np.var(ok, ddof=1))
    dev2 = (ok - mean) ** 2
    return MomentDiagnostic(statistic, mean, var, math.sqrt(var / n),
                            float(np.std(dev2, ddof=1) / math.sqrt(n)), int(n), int(x.size - n))


@dataclass
class DensitySummary:
    """Plot-ready distribution summaries of one archived statistic."""

    statistic: str
    x: np.ndarray
    density: np.ndarray
    theoretical_q: np.ndarray
    empirical_q: np.ndarray
    p_x: np.ndarray
    p_density: np.ndarray
    z_x: np.ndarray
    z_density: np.ndarray
    mean: float
    sd: float
    n: int

    def panels(self):
        return {
            "density": (self.x, self.density),
            "qq": (self.theoretical_q, self.empirical_q),
            "pvalue_density": (self.p_x, self.p_density),
            "pvalue_normal_density": (self.z_x, self.z_density),
        }

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["panel", "x", "y"])
            for panel, (xs, ys) in self.panels().items():
                for a, b in zip(xs, ys):
                    w.writerow([panel, repr(float(a)), repr(float(b))])


def _histogram(values, edges):
    counts, edges = np.histogram(values, bins=edges)
    width = np.diff(edges)
    return 0.5 * (edges[:-1] + edges[1:]), counts / (values.size * width)


def density_summary(archive, statistic, grid=None, p_bins=20):
    """Histogram density, normal QQ pairs and p-value densities of a statistic.

    Parameters
    ----------
    archive : list of archive rows
    statistic : str
    grid : array_like, optional
        Bin edges for the statistic and for the normal scores of its
        p-values (default: 41 edges on [-4, 4]).
    p_bins : int
        Equal-width bins of the p-value histogram on (0, 1).
    """
    rows = [row for row in archive if row[1] == statistic and not math.isnan(row[3])]
    if not rows:
        raise ValueError(f"archive has no usable rows for {statistic!r}")
    edges = np.linspace(-4.0, 4.0, 41) if grid is None else np.asarray(grid, dtype=float)
    values = np.array([row[2] for row in rows])
    pvals = np.array([row[3] for row in rows])
    finite = values[np.isfinite(values)]
    x, dens = _histogram(finite, edges)
    emp = np.sort(finite)
    n = emp.size
    theo = normal_score((np.arange(1, n + 1) - 0.5) / n)
    px, pdens = _histogram(pvals, np.linspace(0.0, 1.0, p_bins + 1))
    z = normal_score(pvals)
    zx, zdens = _histogram(z[np.isfinite(z)], edges)
    sd = float(np.std(finite, ddof=1)) if n > 1 else math.nan
    return DensitySummary(statistic, x, dens, theo, emp, px, pdens, zx, zdens,
                          float(np.mean(finite)), sd, int(pvals.size))
