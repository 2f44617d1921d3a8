"""Mean-variance portfolio construction under parameter uncertainty."""

from .core import (
    AssetParams,
    NotPositiveDefiniteError,
    PortfolioMathError,
    RiskPreference,
    SharpeQuadratic,
    SharpeVector,
    SingularMatrixError,
    hadamard,
    sharpe_quadratic,
    sharpe_vector,
    solve_symmetric,
)
from .factors import (
    AdjustmentFactors,
    CorrDensity,
    CorrUncertainty,
    DriftUncertainty,
    NonConvergenceError,
    NormalizationFailureError,
    PoleNonIntegrableError,
    VolUncertainty,
    a_factor_curve,
    build_factors,
    corr_density,
    corr_mean_and_ratio,
    corr_ratio_curve,
    corr_ratio_expectation,
    drift_factor,
    pv_inverse_gaussian,
    sigma_from_variance_ratio,
    symmetrized_corr_density,
    vol_ratio_moment,
)
from .optimizer import AllocationResult, adjusted_allocate, evaluate_q, markowitz_allocate
from .simulator import (
    AccountState,
    ExperimentConfig,
    ExperimentReport,
    RobustnessTrial,
    demo_config,
    draw_estimates,
    run_experiment,
    run_robustness,
    step_returns,
)

__version__ = "0.1.0"

__all__ = [
    "AccountState",
    "AdjustmentFactors",
    "AllocationResult",
    "AssetParams",
    "CorrDensity",
    "CorrUncertainty",
    "DriftUncertainty",
    "ExperimentConfig",
    "ExperimentReport",
    "NonConvergenceError",
    "NormalizationFailureError",
    "NotPositiveDefiniteError",
    "PoleNonIntegrableError",
    "PortfolioMathError",
    "RiskPreference",
    "RobustnessTrial",
    "SharpeQuadratic",
    "SharpeVector",
    "SingularMatrixError",
    "VolUncertainty",
    "a_factor_curve",
    "adjusted_allocate",
    "build_factors",
    "corr_density",
    "corr_mean_and_ratio",
    "corr_ratio_curve",
    "corr_ratio_expectation",
    "demo_config",
    "draw_estimates",
    "drift_factor",
    "evaluate_q",
    "hadamard",
    "markowitz_allocate",
    "pv_inverse_gaussian",
    "run_experiment",
    "run_robustness",
    "sharpe_quadratic",
    "sharpe_vector",
    "sigma_from_variance_ratio",
    "solve_symmetric",
    "step_returns",
    "symmetrized_corr_density",
    "vol_ratio_moment",
]
