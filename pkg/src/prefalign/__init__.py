"""Preference alignment from pairwise comparisons.

Two-stage estimation of a sparse preference vector: Lasso support recovery
from noisy labels, then per-coordinate probabilistic bisection driven by
comparison queries whose answers follow a random-utility choice model.
Includes the bisection engine, recovery bounds, experiment harness,
choice-model calibration, and a session service for human-backed runs.
"""

from .bisect import (
    MapbConfig,
    MapbEngine,
    MapbTrace,
    PiecewiseDensity,
    StoppingConstants,
    db_align,
    density_update,
    hbar,
    mapb_align,
    median,
    smallest_credible_interval,
    tau_horizontal,
    tau_vertical,
    vertical_step,
)
from .calibrate import (
    CalibrationResult,
    ComparisonRecord,
    EstimateRecord,
    bootstrap,
    calibrate_from_logs,
    estimate_sigma,
    fit_choice_model,
)
from .core import (
    ComparisonAnswer,
    ComparisonQuery,
    DeterministicResponder,
    DistanceSpec,
    OracleParams,
    SimulatedResponder,
    choice_probability_plus,
    distance,
    gumbel_choice_frequency,
    make_query,
    respond,
    utility,
    utility_gap_plus,
)
from .pipeline import (
    AlignmentPlan,
    AssConfig,
    DiagnosticsConfig,
    OrthoBasis,
    SlLhfConfig,
    ass_align,
    gram_schmidt,
    lnca_check,
    optimal_refinement_width,
    phi_bound,
    sl_lhf_run,
)
from .sparse import (
    Dataset,
    GramSketch,
    RecoveryParams,
    SparseModel,
    cv_select_lambda,
    ell_inf_bound,
    lasso_fit,
    load_dataset_csv,
    model_export,
    save_dataset_csv,
    stage1_sample_size,
    theoretical_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentPlan",
    "AssConfig",
    "CalibrationResult",
    "ComparisonAnswer",
    "ComparisonQuery",
    "ComparisonRecord",
    "Dataset",
    "DeterministicResponder",
    "DiagnosticsConfig",
    "DistanceSpec",
    "EstimateRecord",
    "GramSketch",
    "MapbConfig",
    "MapbEngine",
    "MapbTrace",
    "OracleParams",
    "OrthoBasis",
    "PiecewiseDensity",
    "RecoveryParams",
    "SimulatedResponder",
    "SlLhfConfig",
    "SparseModel",
    "StoppingConstants",
    "ass_align",
    "bootstrap",
    "calibrate_from_logs",
    "choice_probability_plus",
    "cv_select_lambda",
    "db_align",
    "density_update",
    "distance",
    "ell_inf_bound",
    "estimate_sigma",
    "fit_choice_model",
    "gram_schmidt",
    "gumbel_choice_frequency",
    "hbar",
    "lasso_fit",
    "lnca_check",
    "load_dataset_csv",
    "make_query",
    "mapb_align",
    "median",
    "model_export",
    "optimal_refinement_width",
    "save_dataset_csv",
    "phi_bound",
    "respond",
    "sl_lhf_run",
    "smallest_credible_interval",
    "stage1_sample_size",
    "tau_horizontal",
    "tau_vertical",
    "theoretical_lambda",
    "utility",
    "utility_gap_plus",
    "vertical_step",
]
