"""Covariate-adjusted regression by binning, with asymptotic inference."""
from .binning import BinPartition, bin_data, make_bins, merge_sparse_bins
from .distortion import DistortionSpec, paper_distortions, validate_identifiability
from .errors import CarError
from .estimator import CarFit, Dataset, estimate_gamma, export_raw_coefficients, fit_bins, fit_car
from .inference import (
    ConfidenceInterval,
    car_intervals,
    confidence_interval,
    estimate_variances,
    naive_ols,
)
from .linalg import guarded_ols
from .simulation import (
    GenerativeModel,
    generate,
    normality_check,
    paper_model,
    run_monte_carlo,
    theoretical_variance,
)

__version__ = "0.1.0"

__all__ = [
    "BinPartition",
    "CarError",
    "CarFit",
    "ConfidenceInterval",
    "Dataset",
    "DistortionSpec",
    "GenerativeModel",
    "bin_data",
    "car_intervals",
    "confidence_interval",
    "estimate_gamma",
    "estimate_variances",
    "export_raw_coefficients",
    "fit_bins",
    "fit_car",
    "generate",
    "guarded_ols",
    "make_bins",
    "merge_sparse_bins",
    "naive_ols",
    "normality_check",
    "paper_distortions",
    "paper_model",
    "run_monte_carlo",
    "theoretical_variance",
    "validate_identifiability",
]
