"""Reduced-rank and envelope vector autoregressions.

Four nested estimators for the VAR(p) coefficient matrix: unrestricted
least squares, reduced rank, envelope, and reduced-rank envelope, with
closed-form or Grassmann-optimized fits, order/rank/dimension selection,
asymptotic standard errors under normal and non-normal innovations, a
simulation harness, and pseudo-real-time forecast evaluation.
"""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticCovariance,
    FisherInformation,
    GradientMatrices,
    ParameterVectors,
    SERatios,
    avar,
    avar_nonnormal,
    companion_matrix,
    estimate_vtilde,
    fisher_information,
    gradient_matrices,
    population_gamma_p,
    se_ratios,
)
from .envelope import (
    EnvelopeContext,
    EnvelopeFit,
    OptimizerOptions,
    active_backend,
    envelope_objective,
    optimize_envelope_1d,
    optimize_envelope_fg,
    use_backend,
)
from .estimators import (
    MODELS,
    VarEstimate,
    conditional_loglik,
    fit_evar,
    fit_known_phi,
    fit_model,
    fit_olsvar,
    fit_revar,
    fit_rrvar,
    loglik_from_moments,
    nop_count,
)
from .exceptions import (
    BadDimsError,
    BadFamilyError,
    BadHorizonError,
    BadRankError,
    CannotStabilizeError,
    DegenerateCandidateError,
    DimensionMismatchError,
    NotPSDError,
    NotSemiorthogonalError,
    RankDeficientError,
    RenvarError,
    SingularGramError,
    SingularMatrixError,
    TooShortError,
    ZeroSEError,
)
from .forecast import (
    ForecastRun,
    ForecastTable,
    bootstrap_forecast_table,
    evaluate_rmsfe,
    forecast_h,
    forecast_path,
    stationary_bootstrap,
)
from .linalg import orthogonal_complement, projection, sym_power, vech
from .moments import (
    AutocovarianceSet,
    CanonicalDecomposition,
    LagDesign,
    TimeSeriesData,
    build_lag_design,
    canonical_correlations,
    sample_autocovariances,
)
from .selection import (
    DimSelection,
    LagSelection,
    RankSelection,
    RankTestResult,
    rank_test,
    select_dims,
    select_lag,
    select_rank,
)
from .simulate import (
    FAMILIES,
    McReport,
    SelectionReport,
    SelectionScenario,
    SimulationScenario,
    TrueParameters,
    generate_errors,
    generate_true_parameters,
    run_monte_carlo,
    run_selection_study,
    simulate_var,
)
