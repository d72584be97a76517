"""Estimators of expected calibration error, reliability curves and a
synthetic benchmark for comparing them."""

__version__ = "0.1.0"

from .binning import (
    binned_ece,
    binned_mce,
    build_adaptive_binning,
    build_convex_mapping,
    build_one_bin_mapping,
    build_uniform_binning,
    diagram_points,
    sqrt_bin_heuristic,
)
from .core import (
    CalibrationDataError,
    CalibrationSetting,
    EceEstimate,
    LabeledScores,
    ScoredEvents,
    aggregate_classwise,
    extract_events,
    validate,
)
from .density import (
    Grid,
    bootstrap_reliability,
    ece_d,
    estimate_lce,
    kde_mirrored,
    silverman_bandwidth,
)
from .estimators import BinnedECE, DensityECE, ReliabilityCurveEstimator, make_estimator

__all__ = [
    "BinnedECE",
    "CalibrationDataError",
    "CalibrationSetting",
    "DensityECE",
    "EceEstimate",
    "Grid",
    "LabeledScores",
    "ReliabilityCurveEstimator",
    "ScoredEvents",
    "aggregate_classwise",
    "binned_ece",
    "binned_mce",
    "bootstrap_reliability",
    "build_adaptive_binning",
    "build_convex_mapping",
    "build_one_bin_mapping",
    "build_uniform_binning",
    "diagram_points",
    "ece_d",
    "estimate_lce",
    "extract_events",
    "kde_mirrored",
    "make_estimator",
    "silverman_bandwidth",
    "sqrt_bin_heuristic",
    "validate",
]
