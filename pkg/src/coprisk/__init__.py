"""Copula-based dependence estimation for competing-risks durations.

Simulates dependent competing-risks data with Weibull margins, estimates
the conditional joint survival surface and its covariate derivatives with
product kernels, and recovers the Archimedean copula parameter from the
surface's curvature ratio using a covariate exclusion restriction.
"""

from .copula import (
    CopulaFamily,
    CopulaModel,
    GeneratorValue,
    NoRootError,
    ThetaSolution,
    check_ordering_condition,
    generator,
    inverse_generator,
    joint_survival,
    kendalls_tau,
    phi_log_deriv_ratio,
    theta_for_tau,
    theta_from_ratio,
)
from .data import Observation, Sample, read_dataset_csv, write_dataset_csv
from .dgp import (
    DgpConfig,
    LatentDraws,
    OracleSurface,
    WeibullMarginal,
    conditional_copula_inverse,
    default_config,
    oracle_surface,
    simulate,
    simulate_latent,
)
from .estimator import (
    AllPointsExcludedError,
    GridSpec,
    McSummary,
    ThetaSeries,
    default_trim_from_series,
    monte_carlo,
    oracle_surface_estimates,
    replicate_theta_series,
    summarize_replicates,
    theta_series,
    trim_series,
    write_mc_replicates_csv,
    write_theta_series_csv,
)
from .kernel import (
    EmptyNeighborhoodError,
    KernelShape,
    KernelSpec,
    KernelSums,
    SurfaceEstimate,
    estimate_surface,
    estimate_surface_grid,
    kernel_deriv,
    kernel_eval,
    raw_sums,
)

__version__ = "0.1.0"

__all__ = [
    "AllPointsExcludedError",
    "CopulaFamily",
    "CopulaModel",
    "DgpConfig",
    "EmptyNeighborhoodError",
    "GeneratorValue",
    "GridSpec",
    "KernelShape",
    "KernelSpec",
    "KernelSums",
    "LatentDraws",
    "McSummary",
    "NoRootError",
    "Observation",
    "OracleSurface",
    "Sample",
    "SurfaceEstimate",
    "ThetaSeries",
    "ThetaSolution",
    "WeibullMarginal",
    "check_ordering_condition",
    "conditional_copula_inverse",
    "default_config",
    "default_trim_from_series",
    "estimate_surface",
    "estimate_surface_grid",
    "generator",
    "inverse_generator",
    "joint_survival",
    "kendalls_tau",
    "kernel_deriv",
    "kernel_eval",
    "monte_carlo",
    "oracle_surface",
    "oracle_surface_estimates",
    "phi_log_deriv_ratio",
    "raw_sums",
    "read_dataset_csv",
    "replicate_theta_series",
    "simulate",
    "simulate_latent",
    "summarize_replicates",
    "theta_for_tau",
    "theta_from_ratio",
    "theta_series",
    "trim_series",
    "write_dataset_csv",
    "write_mc_replicates_csv",
    "write_theta_series_csv",
    "__version__",
]
