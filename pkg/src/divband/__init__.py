"""Minimax robust binary hypothesis testing under f-divergence-ball and
density-band uncertainty: least favorable distributions, equivalent band
models, clipped likelihood-ratio tests, and saddle-point verification."""

from ._kernels import backend as kernel_backend
from .bands import (
    BandModel,
    LFDSolution,
    SolverOptions,
    clip_update,
    normalized_clip,
    scaled_band,
    solve_band_lfds,
)
from .calibration import (
    CalibrationResult,
    UncertaintyBall,
    calibrate,
    clip_fixed_point,
    coefficients_from_multipliers,
    contamination_report,
    extract_band_coefficients,
    stationarity_residuals_for,
)
from .decision import (
    DecisionRule,
    SimulationReport,
    delta,
    error_probabilities,
    saddle_rule,
    simulate_errors,
    weighted_error,
)
from .divergence import (
    DivergenceFamily,
    alpha_divergence,
    chi_squared,
    eval_divergence,
    g_eval,
    kl,
    make_family,
    reverse_family,
    reverse_kl,
    squared_hellinger,
    total_variation,
)
from .grid import (
    Grid,
    GriddedDensity,
    GriddedMeasure,
    gaussian_density,
    inverse_cdf_sample,
    load_density_csv,
    normalize,
    quadrature,
)
from .probes import (
    ProbeReport,
    brute_force_band_lfds,
    containment_probe,
    product_saddle_probe,
    saddle_probe,
    sample_ball_member,
    sample_band_member,
)

__version__ = "0.1.0"

__all__ = [
    "BandModel",
    "CalibrationResult",
    "DecisionRule",
    "DivergenceFamily",
    "Grid",
    "GriddedDensity",
    "GriddedMeasure",
    "LFDSolution",
    "ProbeReport",
    "SimulationReport",
    "SolverOptions",
    "UncertaintyBall",
    "alpha_divergence",
    "brute_force_band_lfds",
    "calibrate",
    "chi_squared",
    "clip_fixed_point",
    "clip_update",
    "coefficients_from_multipliers",
    "containment_probe",
    "contamination_report",
    "delta",
    "error_probabilities",
    "eval_divergence",
    "extract_band_coefficients",
    "g_eval",
    "gaussian_density",
    "inverse_cdf_sample",
    "kernel_backend",
    "kl",
    "load_density_csv",
    "make_family",
    "normalize",
    "normalized_clip",
    "product_saddle_probe",
    "quadrature",
    "reverse_family",
    "reverse_kl",
    "saddle_probe",
    "saddle_rule",
    "sample_ball_member",
    "sample_band_member",
    "scaled_band",
    "simulate_errors",
    "solve_band_lfds",
    "squared_hellinger",
    "stationarity_residuals_for",
    "total_variation",
    "weighted_error",
]
