"""Simulation and estimation lab for box-counting schemes on the range
of subordinators: optimal interval covers, mesh counts, the capped-jump
count statistic, renewal estimation, concentration diagnostics and the
Monte Carlo campaigns that verify the limit theorems."""

__version__ = "0.1.0"

from .models import (CustomModel, GammaModel, LevyModel, ShortenedModel,
                     StableModel, TruncatedStableModel, drift_only,
                     load_model, model_from_dict)
from .paths import JumpSkeleton, SimConfig, sample_skeleton, value_at

__all__ = [
    "__version__",
    "LevyModel", "StableModel", "GammaModel", "TruncatedStableModel",
    "CustomModel", "ShortenedModel", "drift_only", "model_from_dict",
    "load_model",
    "JumpSkeleton", "SimConfig", "sample_skeleton", "value_at",
]
