"""Model selection confidence sets by likelihood-ratio screening."""

__version__ = "0.1.0"

from .adaptive import AsConfig, AsResult, estimate_hit_rate, run_mscs_as, sample_models
from .core import (
    ImportanceReport,
    LrtRecord,
    MscsResult,
    build_mscs,
    detectability_margin,
    inclusion_importance,
    lrt,
)
from .likelihood import Dataset, Family, FitResult, fit, loglik_at
from .model_space import ModelIndex, ModelSpace, bell_number, features_of
from .stats import ChiSqSpec, chi2_cdf, chi2_quantile, chi2_sf, kn, noncentrality

__all__ = [
    "AsConfig",
    "AsResult",
    "ChiSqSpec",
    "Dataset",
    "Family",
    "FitResult",
    "ImportanceReport",
    "LrtRecord",
    "ModelIndex",
    "ModelSpace",
    "MscsResult",
    "bell_number",
    "build_mscs",
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "detectability_margin",
    "estimate_hit_rate",
    "features_of",
    "fit",
    "inclusion_importance",
    "kn",
    "loglik_at",
    "lrt",
    "noncentrality",
    "run_mscs_as",
    "sample_models",
]
