"""Continuous-time capture-recapture with frailty, covariates and
behavioral response.

Fits Cox-type capture intensities to repeated-identification data on a
fixed observation window, combining Gamma frailty heterogeneity, observed
covariates, a nonparametric time-varying baseline and a flexible (delayed
onset, finite memory) behavioral response, and turns the fitted model into
a closed-population size estimate with standard errors.
"""

from .data import CaptureHistory, CountSummary, count_summary
from .errors import (
    DataError,
    DegenerateBaselineError,
    DegenerateExposureError,
    DomainError,
    EstimationError,
    IdentifiabilityError,
    RecaptureError,
)
from .model import (
    BehaviorSpec,
    LinearBaseline,
    ModelSpec,
    ParamState,
    StepBaseline,
    behavior_active,
    behavior_capture_count,
    capture_probability,
    effective_cum_hazard,
    hazard_ratio,
    identifiability_diagnostic,
    validate_identifiability,
)
from .likelihood import (
    ModelContext,
    build_context,
    homogeneous_jumps,
    eccl_loglik,
    marginal_capture_probability,
    miss_odds,
    profile_eccl_loglik,
    profile_jumps,
    risk_denominator,
    score_vector,
    subject_loglik,
    total_loglik,
)
from .em import (
    EmConfig,
    FitResult,
    baseline_update,
    fit,
    moment_frailty_shape,
    observed_information,
    posterior_frailty,
    profile_frailty_shape,
)
from .population import (
    PopulationEstimate,
    capture_weights,
    ht_estimate,
    population_estimate,
    scaled_estimate,
    variance_components,
)
from .selection import (
    GridCell,
    GridResult,
    MODEL_NAMES,
    chao_estimate,
    fit_model,
    grid_search,
    likelihood_ratio_test,
    m0_estimate,
    resolve_model,
    restricted_spec,
    wald_test,
)
from .simulate import (
    ConstantRate,
    PiecewiseRate,
    SimulationConfig,
    SinusoidRate,
    oracle_posterior_frailty,
    oracle_subject_loglik,
    oracle_total_loglik,
    simulate,
)
from .zeta import (
    digamma,
    hurwitz_zeta,
    log_gamma,
    log_hurwitz_zeta,
    log_zeta_ratio,
    zeta_integral,
)
from .estimator import RecaptureModel

__version__ = "0.1.0"

__all__ = [
    "BehaviorSpec",
    "CaptureHistory",
    "ConstantRate",
    "CountSummary",
    "DataError",
    "DegenerateBaselineError",
    "DegenerateExposureError",
    "DomainError",
    "EmConfig",
    "EstimationError",
    "FitResult",
    "GridCell",
    "GridResult",
    "IdentifiabilityError",
    "LinearBaseline",
    "MODEL_NAMES",
    "ModelContext",
    "ModelSpec",
    "ParamState",
    "PiecewiseRate",
    "PopulationEstimate",
    "RecaptureError",
    "RecaptureModel",
    "SimulationConfig",
    "SinusoidRate",
    "StepBaseline",
    "baseline_update",
    "behavior_active",
    "behavior_capture_count",
    "build_context",
    "capture_probability",
    "capture_weights",
    "chao_estimate",
    "count_summary",
    "digamma",
    "eccl_loglik",
    "effective_cum_hazard",
    "fit",
    "fit_model",
    "grid_search",
    "hazard_ratio",
    "homogeneous_jumps",
    "ht_estimate",
    "hurwitz_zeta",
    "identifiability_diagnostic",
    "likelihood_ratio_test",
    "log_gamma",
    "log_hurwitz_zeta",
    "log_zeta_ratio",
    "m0_estimate",
    "marginal_capture_probability",
    "miss_odds",
    "moment_frailty_shape",
    "observed_information",
    "oracle_posterior_frailty",
    "oracle_subject_loglik",
    "oracle_total_loglik",
    "population_estimate",
    "posterior_frailty",
    "profile_eccl_loglik",
    "profile_frailty_shape",
    "profile_jumps",
    "resolve_model",
    "restricted_spec",
    "risk_denominator",
    "scaled_estimate",
    "score_vector",
    "simulate",
    "subject_loglik",
    "total_loglik",
    "validate_identifiability",
    "variance_components",
    "wald_test",
    "zeta_integral",
]
