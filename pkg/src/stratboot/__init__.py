"""Likelihood pivots, parametric bootstrap and higher-order inference for
stratified models with many nuisance parameters."""
from ._jit import BACKEND
from .errors import StratbootError
from .model_api import ParamPoint, StratifiedDataset, StratumModel, total_loglik, total_score
from .models import build, default_truths

__version__ = "0.1.0"

__all__ = ["BACKEND", "ParamPoint", "StratbootError", "StratifiedDataset", "StratumModel",
           "build", "default_truths", "total_loglik", "total_score", "__version__"]
