"""Bayesian change-point hazard regression with S-path samplers."""
from ._backend import BACKEND
from .posterior import SurvivalData, UniformPrior, make_context
from .process import GammaCRM, build_g0, build_gN

__version__ = "0.1.0"

__all__ = ["BACKEND", "SurvivalData", "UniformPrior", "make_context", "GammaCRM",
           "build_gN", "build_g0", "__version__"]
