"""Fractional-polynomial regression with PMM2 estimation, selection and Monte Carlo tools."""

from .basis import (
    DesignMatrix,
    EnumerationMode,
    FpBlock,
    FpPower,
    FpTerm,
    Track,
    build_design,
    enumerate_blocks,
    fp_transform,
    shift_domain,
)
from .bootstrap import BootstrapResult, SelectionFrequencyTable, bootstrap_fixed_model
from .bootstrap import bootstrap_selection_stability
from .estimators import (
    Estimator,
    FitResult,
    SolverConfig,
    fit,
    fit_huber,
    fit_ols,
    fit_pmm2,
    predict_mean,
)
from .formb import (
    CorrelantReport,
    Parity,
    ScoreBasisFn,
    correlant_report,
    default_basis,
    kunchenko_b2,
    schur_monotonicity_check,
)
from .laws import ErrorLaw
from .linalg import least_squares_solve, spectral_analyze, symmetric_solve
from .moments import ResidualCumulants, analytic_cumulants, g2_closed_form, sample_cumulants
from .selection import (
    SelectionResult,
    SingleBestRule,
    bic,
    fma,
    prediction_estimand,
    report_single_best_rule,
    sweep,
)
from .simulation import (
    McDesign,
    capture_timings,
    run_fma_experiment,
    run_matched_basis_experiment,
    run_symmetric_degradation_experiment,
    sample_dgp,
)

__version__ = "0.1.0"

__all__ = [
    "DesignMatrix",
    "EnumerationMode",
    "FpBlock",
    "FpPower",
    "FpTerm",
    "Track",
    "build_design",
    "enumerate_blocks",
    "fp_transform",
    "shift_domain",
    "BootstrapResult",
    "SelectionFrequencyTable",
    "bootstrap_fixed_model",
    "bootstrap_selection_stability",
    "Estimator",
    "FitResult",
    "SolverConfig",
    "fit",
    "fit_huber",
    "fit_ols",
    "fit_pmm2",
    "predict_mean",
    "CorrelantReport",
    "Parity",
    "ScoreBasisFn",
    "correlant_report",
    "default_basis",
    "kunchenko_b2",
    "schur_monotonicity_check",
    "ErrorLaw",
    "least_squares_solve",
    "spectral_analyze",
    "symmetric_solve",
    "ResidualCumulants",
    "analytic_cumulants",
    "g2_closed_form",
    "sample_cumulants",
    "SelectionResult",
    "SingleBestRule",
    "bic",
    "fma",
    "prediction_estimand",
    "report_single_best_rule",
    "sweep",
    "McDesign",
    "capture_timings",
    "run_fma_experiment",
    "run_matched_basis_experiment",
    "run_symmetric_degradation_experiment",
    "sample_dgp",
]
