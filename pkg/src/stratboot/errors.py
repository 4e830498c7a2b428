"""Exception hierarchy shared by all modules."""


class StratbootError(Exception):
    """Base class for all package errors."""


class DimensionError(StratbootError, ValueError):
    """Parameter and dataset shapes do not agree."""


class InvalidObservation(StratbootError, ValueError):
    """An observation lies outside the model support or is malformed."""


class NonFiniteDensity(StratbootError, ValueError):
    """The log-likelihood is not finite at the requested parameter."""


class StratumDiverged(StratbootError):
    """A per-stratum nuisance maximizer escaped to the boundary."""

    def __init__(self, stratum, psi=None):
        self.stratum = int(stratum)
        self.psi = psi
        msg = f"nuisance estimate for stratum {self.stratum} diverged"
        if psi is not None:
            msg += f" at psi={psi!r}"
        super().__init__(msg)


class AllStrataDiverged(StratbootError):
    """Every stratum was dropped; nothing is left to fit."""


class NoConvergence(StratbootError):
    """Newton iterations hit the iteration cap without meeting tolerance."""


class NonPositiveInformation(StratbootError, ArithmeticError):
    """An information quantity that must be positive is not."""


class NegativeDeviance(StratbootError, ArithmeticError):
    """l(full fit) fell below l(constrained fit) beyond solver noise."""


class TooManyFailures(StratbootError):
    """Bootstrap or simulation failures exceeded the configured budget."""

    def __init__(self, failures, total, budget):
        self.failures = int(failures)
        self.total = int(total)
        self.budget = float(budget)
        super().__init__(
            f"{self.failures} of {self.total} replicates failed "
            f"(budget {self.budget:.3%})"
        )


class DegenerateSample(StratbootError, ValueError):
    """Replicate statistics have zero spread."""


class UnavailableExpectations(StratbootError):
    """Neither analytic nor Monte Carlo expectations can be used."""


class DataFormatError(StratbootError, ValueError):
    """A dataset file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigError(StratbootError, ValueError):
    """Unknown model name or invalid model/experiment configuration."""
