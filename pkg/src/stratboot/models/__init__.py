"""The model zoo: five stratified models behind the :class:`StratumModel` contract.

=================  ===========================  ============================
name               interest psi                 nuisance lambda_i
=================  ===========================  ============================
``gamma``          log common shape             log scale
``beta``           log common precision         logit mean
``curved_normal``  log variance offset          log mean (variance e^{psi+lam/2})
``behrens_fisher`` common normal mean           log variance
``matched_pairs``  log odds ratio               stratum log odds (x = 0)
=================  ===========================  ============================
"""
import math

import numpy as np

from ..errors import ConfigError, InvalidObservation
from ..model_api import ParamPoint, StratumModel
from ..rng import Stream
from . import _dispatch as D

# split index reserved for true-parameter recipes; replicate streams use
# small indices so this never collides with them
TRUTH_STREAM = 0x7472757468


class GammaSharedShape(StratumModel):
    """Gamma observations with shape e^psi shared and scale e^lam_i per stratum."""

    name = "gamma"
    kind = D.GAMMA
    exact_lambda = True
    analytic_expectations = True

    def check(self, data):
        for i, y in enumerate(data.strata):
            if not np.all(y > 0):
                raise InvalidObservation(f"stratum {i + 1}: gamma observations must be positive")


class BetaSharedPrecision(StratumModel):
    """Beta observations with precision e^psi shared and mean expit(lam_i)."""

    name = "beta"
    kind = D.BETA

    def check(self, data):
        for i, y in enumerate(data.strata):
            if not np.all((y > 0) & (y < 1)):
                raise InvalidObservation(f"stratum {i + 1}: beta observations must lie in (0, 1)")


class CurvedExpNormal(StratumModel):
    """Normal observations with mean e^lam_i and variance e^(psi + lam_i/2)."""

    name = "curved_normal"
    kind = D.CURVED_NORMAL
    exact_lambda = True


class BehrensFisher(StratumModel):
    """Normal observations with common mean psi and variance e^lam_i."""

    name = "behrens_fisher"
    kind = D.BEHRENS_FISHER
    exact_lambda = True
    analytic_expectations = True


class BinomialMatchedPairs(StratumModel):
    """Bernoulli observations with logit p = lam_i + psi * x.

    Within each stratum of even size m the first m/2 observations have
    x = 1 and the rest x = 0. Other designs are rejected.

    Parameters
    ----------
    config : dict, optional
        ``{"m": even int}`` fixes the stratum size.
    """

    name = "matched_pairs"
    kind = D.MATCHED_PAIRS
    discrete = True
    iid = False
    exact_lambda = True

    def __init__(self, config=None):
        super().__init__(config)
        m = self.config.get("m")
        if m is not None and (int(m) != m or m < 2 or m % 2):
            raise ConfigError(f"matched_pairs needs an even stratum size m >= 2, got {m!r}")

    def design(self, m):
        if m % 2:
            raise InvalidObservation(f"matched_pairs strata need an even size, got {m}")
        x = np.zeros(m)
        x[: m // 2] = 1.0
        return x

    def check(self, data):
        m_fixed = self.config.get("m")
        for i, y in enumerate(data.strata):
            if m_fixed is not None and y.size != m_fixed:
                raise InvalidObservation(f"stratum {i + 1} has size {y.size}, model expects {m_fixed}")
            if not np.all((y == 0) | (y == 1)):
                raise InvalidObservation(f"stratum {i + 1}: observations must be 0 or 1")
            x = self.design(y.size)
            if data.covariates is not None and not np.array_equal(data.covariates[i], x):
                raise InvalidObservation(
                    f"stratum {i + 1}: covariates must be 1 for the first half and 0 for the rest")


MODELS = {
    cls.name: cls
    for cls in (GammaSharedShape, BetaSharedPrecision, CurvedExpNormal,
                BehrensFisher, BinomialMatchedPairs)
}
_CONFIG_KEYS = {"matched_pairs": {"m"}}


def build(name, config=None):
    """Instantiate a model by name.

    Raises
    ------
    ConfigError
        Unknown name or unsupported configuration key/value.
    """
    try:
        cls = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    config = dict(config or {})
    extra = set(config) - _CONFIG_KEYS.get(name, set())
    if extra:
        raise ConfigError(f"model {name!r} does not accept config keys {sorted(extra)}")
    return cls(config)


def default_truths(name, q, seed):
    """Reproducible true parameter values used by the simulation designs.

    ``gamma``: psi = log 2, lam_i = log of Exp(rate 1/2) draws.
    ``beta``: psi = log 2, lam_i ~ N(0, 1).
    ``curved_normal``: psi = log(1/2), lam_i ~ N(0, 1).
    ``behrens_fisher``: psi = 0, lam_i ~ U(0, 1).
    ``matched_pairs``: psi = 1, lam_i ~ N(0, 1).
    """
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    q = int(q)
    if q < 1:
        raise ConfigError("q must be at least 1")
    rng = Stream(seed).split(TRUTH_STREAM)
    if name == "gamma":
        psi = math.log(2.0)
        lam = [math.log(2.0 * rng.exponential()) for _ in range(q)]
    elif name == "behrens_fisher":
        psi = 0.0
        lam = [rng.uniform() for _ in range(q)]
    else:
        psi = {"beta": math.log(2.0), "curved_normal": math.log(0.5), "matched_pairs": 1.0}[name]
        lam = [rng.normal() for _ in range(q)]
    return ParamPoint(psi, np.array(lam))


__all__ = ["build", "default_truths", "MODELS", "GammaSharedShape", "BetaSharedPrecision",
           "CurvedExpNormal", "BehrensFisher", "BinomialMatchedPairs"]
