"""Nearest-neighbour goodness-of-fit testing for multivariate generalised Gaussian models."""

__version__ = "0.1.0"

from .distribution import (
    MggdParams,
    RadialLaw,
    log_density,
    mahalanobis_moment,
    radial_concentration_const,
    sample_mggd,
    sample_multivariate_t,
    sample_radius,
    sample_unit_sphere,
)
from .data import Dataset, ingest_csv
from .energy import energy_distance
from .estimation import (
    FittedNull,
    TylerConfig,
    calibrate_scale,
    estimate_beta,
    fit_mggd,
    spatial_median,
    tyler_regularized,
)
from .gof import GofReport, TestConfig, bootstrap_pvalue, run_energy_gof, run_test, run_tests
from .linalg import SpdMatrix, WhiteningMap, condition_diagnostics, factorize
from .models import ModelComparison, ModelFit, mahalanobis_qq, model_comparison
from .nnstat import NnStatResult, cross_edge_statistic, nearest_neighbor_indices, within_count
from .simulation import (
    ExperimentConfig,
    RejectionTable,
    emit_pvalue_ecdf,
    run_experiment,
    run_power_experiment,
    run_scale_robustness,
    run_sensitivity,
    run_size_experiment,
)
