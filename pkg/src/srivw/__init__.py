"""Summary-data multivariable Mendelian randomization with spectral
regularization: estimators, weak-instrument diagnostics, and a Monte Carlo
evaluation harness."""

__version__ = "0.1.0"

from .diagnostics import OutlierReport, remove_outliers, snp_q_contributions
from .estimators import (
    CI95_Z,
    Estimate,
    estimate_tau2,
    mv_ivw,
    spectral_regularize,
    srivw,
    srivw_overlap,
    srivw_pleiotropy,
)
from .exceptions import (
    DegenerateDenominatorError,
    DegenerateSpectrumError,
    IllConditionedError,
    InsufficientDataError,
    NotPsdError,
    ParseError,
    SimulationError,
    SrivwError,
    TuningError,
    ValidationError,
)
from .simulate import (
    IndividualSummaries,
    MetricsTable,
    RegressionSummary,
    SimConfig,
    dataset_from_individual,
    generate_individual,
    generate_summary,
    individual_config,
    monte_carlo,
    select_ivs,
    summary_template,
    table1_config,
)
from .strength import (
    STRENGTH_THRESHOLD,
    StrengthReport,
    conditional_f,
    sample_strength_matrix,
    strength_report,
    symmetric_sqrt,
)
from .summary_data import (
    Dataset,
    SnpSummary,
    TrueModel,
    build_sigma_xj,
    estimate_shared_correlation,
    load_correlation,
    load_dataset,
    write_correlation,
    write_dataset,
)
from .tuning import GRID_C, GRID_STEP, TuningResult, grid_b, q_statistic, select_phi

__all__ = [
    "__version__",
    "CI95_Z",
    "GRID_C",
    "GRID_STEP",
    "STRENGTH_THRESHOLD",
    "Dataset",
    "Estimate",
    "IndividualSummaries",
    "MetricsTable",
    "OutlierReport",
    "RegressionSummary",
    "SimConfig",
    "SnpSummary",
    "StrengthReport",
    "TrueModel",
    "TuningResult",
    "build_sigma_xj",
    "conditional_f",
    "dataset_from_individual",
    "estimate_shared_correlation",
    "estimate_tau2",
    "generate_individual",
    "generate_summary",
    "grid_b",
    "individual_config",
    "load_correlation",
    "load_dataset",
    "monte_carlo",
    "mv_ivw",
    "q_statistic",
    "remove_outliers",
    "sample_strength_matrix",
    "select_ivs",
    "select_phi",
    "snp_q_contributions",
    "spectral_regularize",
    "srivw",
    "srivw_overlap",
    "srivw_pleiotropy",
    "strength_report",
    "summary_template",
    "symmetric_sqrt",
    "table1_config",
    "write_correlation",
    "write_dataset",
    # exceptions
    "SrivwError",
    "ValidationError",
    "ParseError",
    "NotPsdError",
    "IllConditionedError",
    "DegenerateSpectrumError",
    "DegenerateDenominatorError",
    "InsufficientDataError",
    "TuningError",
    "SimulationError",
]
