"""Energy balancing weights for modified treatment policies."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Dataset,
    Piece,
    PolicySpec,
    ValidationError,
    WeightVector,
    apply_policy,
    case_study_policy,
    identity_policy,
    piecewise_shift_policy,
    shift_policy,
    shifted_sample,
    validate,
)
from .energy import (  # noqa: E402
    EnergyReport,
    gaussian_mmd,
    median_heuristic,
    pairwise_distances,
    weighted_energy_distance,
)
from .solver import BalanceProblem, SolverOptions, qp_components, solve_ebw  # noqa: E402
from .estimate import (  # noqa: E402
    EstimateResult,
    Pipeline,
    RidgeOutcomeModel,
    augmented_estimate,
    fit_default_model,
    run_pipeline,
    weighted_estimate,
)
from .inference import (  # noqa: E402
    BootstrapConfig,
    influence_values,
    multiplier_bootstrap_se,
    nonparametric_bootstrap_se,
    wald_ci,
)
from .diagnostics import TauScanResult, compare_weights, feasibility_thresholds, tau_scan  # noqa: E402
from .comparators import gps_density_ratio_weights, uniform_weights  # noqa: E402

__all__ = [
    "BalanceProblem", "BootstrapConfig", "Dataset", "EnergyReport", "EstimateResult",
    "Piece", "Pipeline", "PolicySpec", "RidgeOutcomeModel", "SolverOptions",
    "TauScanResult", "ValidationError", "WeightVector", "apply_policy",
    "augmented_estimate", "case_study_policy", "compare_weights",
    "feasibility_thresholds", "fit_default_model", "gaussian_mmd",
    "gps_density_ratio_weights", "identity_policy", "influence_values",
    "median_heuristic", "multiplier_bootstrap_se", "nonparametric_bootstrap_se",
    "pairwise_distances", "piecewise_shift_policy", "qp_components", "run_pipeline",
    "shift_policy", "shifted_sample", "solve_ebw", "tau_scan", "uniform_weights",
    "validate", "wald_ci", "weighted_energy_distance", "weighted_estimate",
]
