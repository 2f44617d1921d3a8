"""Classical and uncertainty-adjusted optimal investment fractions.

Both allocators maximize the expected-utility growth objective

    Q(f) = sum_i f_i (mu_i - r) + (x - 1)/2 sum_ij f_i f_j sigma_i sigma_j rho_ij

over unconstrained fractions (leverage and shorting allowed).  The adjusted
variant rescales the linear term by the drift deflators ``a`` and the
quadratic term elementwise by the risk inflators ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    AssetParams,
    RiskPreference,
    _as_vector,
    _freeze,
    hadamard,
    sharpe_quadratic,
    solve_symmetric,
)
from .factors import AdjustmentFactors


@dataclass(frozen=True)
class AllocationResult:
    """Optimal fractions plus the objective values attained at them.

    ``c_units`` re-expresses each fraction as a multiple of (mu-r)/sigma^2,
    the single-asset optimum; ``fractions`` equals ``c_units`` times that
    scale by construction.  ``du_coefficient`` is the instantaneous
    expected-utility growth rate ``riskless + q_value`` (the factor
    multiplying wealth^x dt).
    """

    fractions: np.ndarray
    c_units: np.ndarray
    q_value: float
    du_coefficient: float

    def __post_init__(self):
        _freeze(self, "fractions", _as_vector(self.fractions, "fractions"))
        _freeze(self, "c_units", _as_vector(self.c_units, "c_units"))

    @property
    def riskless_fraction(self) -> float:
        """Remainder allocated to the riskless asset (may be negative)."""
        return 1.0 - float(self.fractions.sum())


def _allocate(params: AssetParams, rhs_scale: np.ndarray, quad_scale: np.ndarray,
              pref: RiskPreference) -> AllocationResult:
    quad = sharpe_quadratic(params)
    matrix = hadamard(quad.matrix, quad_scale)
    rhs = hadamard(quad.diag, rhs_scale)
    solved = solve_symmetric(matrix, rhs)
    c = pref.aversion * solved
    fractions = c * params.excess() / params.vols**2
    q_value = 0.5 * pref.aversion * float(rhs @ solved)
    return AllocationResult(
        fractions=fractions,
        c_units=c,
        q_value=q_value,
        du_coefficient=params.riskless + q_value,
    )


def markowitz_allocate(params: AssetParams, pref: RiskPreference) -> AllocationResult:
    """Standard mean-variance optimum, parameters taken at face value.

    Raises NotPositiveDefiniteError when the quadratic form has no unique
    maximum.
    """
    n = params.n_assets
    return _allocate(params, np.ones(n), np.ones((n, n)), pref)


def adjusted_allocate(params: AssetParams, factors: AdjustmentFactors,
                      pref: RiskPreference) -> AllocationResult:
    """Uncertainty-adjusted optimum for estimated parameters.

    With unit factors this reproduces ``markowitz_allocate`` exactly; uniform
    factors a, b only rescale the result by a/b (a pure leverage change).  An
    indefinite scaled quadratic form is reported as NotPositiveDefiniteError,
    never silently repaired.
    """
    if factors.n_assets != params.n_assets:
        raise ValueError(
            f"dimension mismatch: {params.n_assets} assets, factors for {factors.n_assets}"
        )
    return _allocate(params, factors.a, factors.b, pref)


def evaluate_q(params: AssetParams, fractions, pref: RiskPreference) -> float:
    """Objective value Q at arbitrary investment fractions."""
    f = _as_vector(fractions, "fractions")
    if f.size != params.n_assets:
        raise ValueError(f"expected {params.n_assets} fractions, got {f.size}")
    cov = np.outer(params.vols, params.vols) * params.corr
    return float(f @ params.excess() + 0.5 * (pref.x - 1.0) * f @ cov @ f)
