"""Clipped Density / Clipped Coverage and kNN-ball baselines for comparing feature sets."""

__version__ = "0.1.0"

from .baseline import (
    complementary_precision,
    coverage,
    density,
    improved_precision,
    improved_recall,
    sym_precision,
    sym_recall,
)
from .calibration import (
    CalibrationTable,
    LogGammaTable,
    apply_g,
    build_calibration_table,
    clipped_coverage,
    expected_clipped_coverage,
    expected_clipped_coverage_survival,
)
from .clipped import (
    ClippedRadii,
    ClippedScores,
    clipped_coverage_unnorm,
    clipped_density,
    clipped_density_real,
    clipped_density_unnorm,
    clipped_radii,
    clipped_scores,
)
from .core import DegenerateCalibrationError, FormatError, KRangeError, MetricConfig, distance
from .estimator import DIAGNOSTICS, METRICS, ClippedDensityCoverage, MetricReport, compute_metrics
from .io import load_matrix, save_matrix
from .neighbors import KnnTable, NeighborIndex, build_index, count_within, knn_distances

__all__ = [
    "DIAGNOSTICS",
    "METRICS",
    "CalibrationTable",
    "ClippedDensityCoverage",
    "ClippedRadii",
    "ClippedScores",
    "DegenerateCalibrationError",
    "FormatError",
    "KRangeError",
    "KnnTable",
    "LogGammaTable",
    "MetricConfig",
    "MetricReport",
    "NeighborIndex",
    "apply_g",
    "build_calibration_table",
    "build_index",
    "clipped_coverage",
    "clipped_coverage_unnorm",
    "clipped_density",
    "clipped_density_real",
    "clipped_density_unnorm",
    "clipped_radii",
    "clipped_scores",
    "complementary_precision",
    "compute_metrics",
    "count_within",
    "coverage",
    "density",
    "distance",
    "expected_clipped_coverage",
    "expected_clipped_coverage_survival",
    "improved_precision",
    "improved_recall",
    "knn_distances",
    "load_matrix",
    "save_matrix",
    "sym_precision",
    "sym_recall",
]
