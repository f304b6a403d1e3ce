"""Copula time-series models (MAG/MAGMAR) for discrete rating-activity counts."""

__version__ = "0.1.0"

from .copulas import CopulaParams, Family
from .process import ClimateLink, ModelKind, ModelSpec, StatePath, simulate
from .transform import DiscreteMarginal, UniformSeries, empirical_marginal, mixed_difference

__all__ = [
    "CopulaParams", "Family", "ClimateLink", "ModelKind", "ModelSpec",
    "StatePath", "simulate", "DiscreteMarginal", "UniformSeries",
    "empirical_marginal", "mixed_difference", "__version__",
]
