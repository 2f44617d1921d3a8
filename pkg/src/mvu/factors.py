"""Adjustment factors computed from user-declared parameter-uncertainty models.

The drift factor deflates confidence in forecast excess returns via the
principal-value expectation of 1/(1+y) over Gaussian relative error y.  The
volatility factors come from lognormal moment corrections, and correlation
factors from a two-exponent density over the estimated correlation.  All
functions are pure; Monte Carlo never appears here (oracles live in tests).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.integrate

from .core import PortfolioMathError, _as_matrix, _as_vector, _freeze


class NonConvergenceError(PortfolioMathError):
    """A series or quadrature exhausted its budget without converging."""


class NormalizationFailureError(PortfolioMathError):
    """The correlation-density normalization integral did not converge."""


class PoleNonIntegrableError(PortfolioMathError):
    """The symmetric principal-value quadrature around the pole failed."""


DRIFT_UNBIASED = "unbiased"
DRIFT_DATA_MINED = "data_mined"
DRIFT_CUSTOM = "custom"
DRIFT_KINDS = (DRIFT_UNBIASED, DRIFT_DATA_MINED, DRIFT_CUSTOM)

# Upward-biased ("data mined") forecasts are modeled as relative error
# y ~ Normal(1/2, 3/4): the deflated view that a zero-excess-return
# observation is a two-sigma event.
DATA_MINED_BIAS_MEAN = 0.5
DATA_MINED_BIAS_SIGMA = 0.75


@dataclass(frozen=True)
class DriftUncertainty:
    """Uncertainty model for one asset's expected excess return estimate.

    ``rel_sigma`` is the standard deviation of the estimate error relative to
    the excess return itself.  ``custom`` lets the caller place the relative
    error at Normal(bias_mean, bias_sigma) directly; ``data_mined`` is the
    fixed deflation preset.
    """

    kind: str = DRIFT_UNBIASED
    rel_sigma: float = 0.0
    bias_mean: float | None = None
    bias_sigma: float | None = None

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        if self.kind == DRIFT_UNBIASED:
            if not np.isfinite(self.rel_sigma) or self.rel_sigma < 0:
                raise ValueError("rel_sigma must be a nonnegative real")
        if self.kind == DRIFT_CUSTOM:
            if self.bias_mean is None or self.bias_sigma is None:
                raise ValueError("custom drift uncertainty requires bias_mean and bias_sigma")
            if not np.isfinite(self.bias_mean):
                raise ValueError("bias_mean must be finite")
            if not np.isfinite(self.bias_sigma) or self.bias_sigma <= 0:
                raise ValueError("bias_sigma must be positive")


@dataclass(frozen=True)
class VolUncertainty:
    """Lognormal volatility-estimate model: sigma_hat = sigma * e^x with
    x ~ Normal(-log_sigma^2 / 2, log_sigma), so the estimate is unbiased."""

    log_sigma: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.log_sigma) or self.log_sigma < 0:
            raise ValueError("log_sigma must be a nonnegative real")


@dataclass(frozen=True)
class CorrUncertainty:
    """Two-exponent density over an estimated correlation on [-1, 1]:

        p(r) ~ (1 - e^(r^2 - 1))^alpha * (1 + sign*r)^n_exp

    ``alpha`` shapes the central bump, ``n_exp`` (odd) the skew toward
    ``sign``; the density vanishes at both endpoints.
    """

    alpha: float
    n_exp: int
    sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ValueError("alpha must be a positive real")
        if not isinstance(self.n_exp, (int, np.integer)) or self.n_exp <= 0 or self.n_exp % 2 == 0:
            raise ValueError(f"n_exp must be an odd positive integer, got {self.n_exp!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class AdjustmentFactors:
    """The per-asset drift deflators ``a`` and pairwise risk inflators ``b``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _as_vector(self.a, "a")
        b = _as_matrix(self.b, "b")
        if b.shape != (a.size, a.size):
            raise ValueError(f"dimension mismatch: a has {a.size} entries, b is {b.shape}")
        if not np.array_equal(b, b.T):
            raise ValueError("b must be symmetric")
        if np.any(np.diagonal(b) < 1.0):
            raise ValueError("b diagonal entries cannot fall below 1")
        _freeze(self, "a", a)
        _freeze(self, "b", b)

    @classmethod
    def unit(cls, n: int) -> "AdjustmentFactors":
        """Certainty limit: every factor is 1 and the standard weights return."""
        return cls(np.ones(n), np.ones((n, n)))

    @property
    def n_assets(self) -> int:
        return self.a.size


# --- principal-value expectation of 1/(1+y), y ~ Normal(mean, sigma) --------

# Below this sigma the series prefactor e^(-1/(2 sigma^2)) underflows toward
# the representable floor; the asymptotic expansion is exact to working
# precision there.
SMALL_SIGMA_CUTOFF = 0.05
MAX_SERIES_TERMS = 10_000
_QUAD_LIMIT = 200


def _series_zero_mean(sigma: float) -> float:
    # sum_n e^(-1/(2s^2))/s^2 / (n! 2^n (2n+1) s^(2n)), with the prefactor
    # carried inside the recurrence so no intermediate overflows.
    s2 = sigma * sigma
    term = math.exp(-0.5 / s2) / s2
    total = term
    for n in range(MAX_SERIES_TERMS):
        term *= (2 * n + 1) / ((n + 1) * (2 * n + 3) * 2 * s2)
        total += term
        if term <= 1e-17 * abs(total):
            return total
    raise NonConvergenceError(
        f"series for sigma={sigma} did not converge within {MAX_SERIES_TERMS} terms"
    )


def _asymptotic_small_sigma(sigma: float) -> float:
    # 1 + s^2 + 3 s^4 + 15 s^6 + ... truncated at its minimum term.
    s2 = sigma * sigma
    total = 1.0
    term = 1.0
    k = 0
    while True:
        nxt = term * (2 * k + 1) * s2
        if nxt >= term or total + nxt == total:
            return total
        total += nxt
        term = nxt
        k += 1


def _pv_quadrature(mean: float, sigma: float) -> float:
    # PV integral of p(y)/(1+y) with the pole at y=-1 removed by pairing
    # symmetric nodes: substituting u = 1+y,
    #   PV = int_0^inf (p(u - 1) - p(-u - 1)) / u du.
    center = 1.0 + mean
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def paired(u: float) -> float:
        zp = (u - center) / sigma
        zm = (-u - center) / sigma
        return norm * (math.exp(-0.5 * zp * zp) - math.exp(-0.5 * zm * zm)) / u

    split = abs(center) + 12.0 * sigma
    hints = sorted({p for p in (abs(center) - sigma, abs(center), abs(center) + sigma) if 0 < p < split})
    total = 0.0
    total_err = 0.0
    for (lo, hi, pts) in ((0.0, split, hints), (split, np.inf, None)):
        val, err = scipy.integrate.quad(
            paired, lo, hi, points=pts, limit=_QUAD_LIMIT, epsabs=1e-12, epsrel=1e-12
        )
        total += val
        total_err += err
    if not math.isfinite(total) or total_err > 1e-8:
        raise NonConvergenceError(
            f"principal-value quadrature failed for mean={mean}, sigma={sigma} (err={total_err:.2e})"
        )
    return total


def pv_inverse_gaussian(mean: float, sigma: float) -> float:
    """Principal-value expectation of 1/(1+y) for y ~ Normal(mean, sigma).

    The pole at y = -1 is excluded symmetrically (two-sided limit).  For a
    centered y this is the fast series in 1/sigma^2; for small sigma the
    equivalent asymptotic expansion 1 + sigma^2 + 3 sigma^4 + ...; shifted
    distributions go through principal-value quadrature.
    """
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not np.isfinite(mean):
        raise ValueError("mean must be finite")
    if mean == 0.0:
        if sigma < SMALL_SIGMA_CUTOFF:
            return _asymptotic_small_sigma(sigma)
        return _series_zero_mean(sigma)
    return _pv_quadrature(mean, sigma)


def drift_factor(u: DriftUncertainty) -> float:
    """Expected ratio of true to estimated excess return under ``u``.

    1 at zero uncertainty, above 1 for moderate unbiased uncertainty, decaying
    to 0 as the relative uncertainty grows; fixed 2/3 * pv(0, 1/2) for the
    data-mined preset.
    """
    if u.kind == DRIFT_UNBIASED:
        if u.rel_sigma == 0.0:
            return 1.0
        return pv_inverse_gaussian(0.0, u.rel_sigma)
    if u.kind == DRIFT_DATA_MINED:
        return (2.0 / 3.0) * pv_inverse_gaussian(0.0, 0.5)
    return pv_inverse_gaussian(u.bias_mean, u.bias_sigma)


def vol_ratio_moment(u: VolUncertainty, power: int) -> float:
    """Moments of the true-to-estimated volatility ratio.

    power 1 -> E[sigma/sigma_hat] = e^(S^2); power 2 -> E[(sigma/sigma_hat)^2]
    = e^(3 S^2), both >= 1.
    """
    if power == 1:
        return math.exp(u.log_sigma**2)
    if power == 2:
        return math.exp(3.0 * u.log_sigma**2)
    raise ValueError(f"power must be 1 or 2, got {power}")


def sigma_from_variance_ratio(var_ratio: float) -> float:
    """Lognormal width matching a declared var(sigma_hat)/sigma^2 ratio."""
    if not np.isfinite(var_ratio) or var_ratio < 0:
        raise ValueError(f"var_ratio must be a nonnegative real, got {var_ratio}")
    return math.sqrt(math.log1p(var_ratio))


# --- correlation-estimate density and its ratio expectation ----------------


class CorrDensity:
    """A normalized density over estimated correlation values in [-1, 1].

    Built from a log-space unnormalized density to stay finite for extreme
    skew exponents.  The normalization constant is computed by adaptive
    quadrature at absolute tolerance 1e-9 (on the max-scaled density).
    """

    _GRID = 20001

    def __init__(self, log_unnormalized: Callable[[np.ndarray], np.ndarray],
                 hint_points: Sequence[float] = ()):
        self._logq = log_unnormalized
        grid = np.linspace(-1.0 + 1e-12, 1.0 - 1e-12, self._GRID)
        extra = np.array([p for p in hint_points if -1.0 < p < 1.0])
        probe = np.concatenate([grid, extra]) if extra.size else grid
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.asarray(self._logq(probe), dtype=float)
        values = np.where(np.isnan(values), -np.inf, values)
        self._log_scale = float(values.max())
        if not np.isfinite(self._log_scale):
            raise NormalizationFailureError("density is zero everywhere on [-1, 1]")
        self._points = tuple(sorted({float(p) for p in hint_points if -1.0 < p < 1.0}
                                    | {float(probe[values.argmax()]), 0.0}))
        norm, err = self._quad(self._scaled)
        if not np.isfinite(norm) or norm <= 0 or err > 1e-9 * max(norm, 1.0):
            raise NormalizationFailureError(
                f"normalization integral did not converge (value={norm}, err={err:.2e})"
            )
        self._norm = norm

    def _scaled(self, rho: float) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            lq = self._logq(np.asarray(rho, dtype=float))
        out = np.exp(lq - self._log_scale)
        return float(np.where(np.isnan(out), 0.0, out))

    def _quad(self, fn, lo: float = -1.0, hi: float = 1.0):
        pts = [p for p in self._points if lo < p < hi]
        return scipy.integrate.quad(
            fn, lo, hi, points=pts or None, limit=_QUAD_LIMIT, epsabs=1e-12, epsrel=1e-12
        )

    def pdf(self, rho):
        """Normalized density, vectorized over ``rho``; zero outside [-1, 1]."""
        rho = np.asarray(rho, dtype=float)
        inside = (rho >= -1.0) & (rho <= 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lq = np.asarray(self._logq(np.where(inside, rho, 0.0)), dtype=float)
        out = np.where(inside, np.exp(lq - self._log_scale) / self._norm, 0.0)
        return np.where(np.isnan(out), 0.0, out)

    def mean(self) -> float:
        val, _ = self._quad(lambda r: r * self._scaled(r))
        return val / self._norm

    def variance(self) -> float:
        m = self.mean()
        val, _ = self._quad(lambda r: (r - m) ** 2 * self._scaled(r))
        return val / self._norm

    def pv_inverse_mean(self) -> float:
        """Principal-value expectation of 1/rho, pairing nodes around rho=0."""

        def paired(t: float) -> float:
            return (self._scaled(t) - self._scaled(-t)) / t

        pts = sorted({abs(p) for p in self._points if p != 0.0 and abs(p) < 1.0})
        val, err = scipy.integrate.quad(
            paired, 0.0, 1.0, points=pts or None, limit=_QUAD_LIMIT, epsabs=1e-12, epsrel=1e-12
        )
        if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise PoleNonIntegrableError(
                f"principal-value quadrature around rho=0 failed (err={err:.2e})"
            )
        return val / self._norm


def _log_unnormalized(u: CorrUncertainty) -> Callable[[np.ndarray], np.ndarray]:
    alpha, n, sign = u.alpha, u.n_exp, float(u.sign)

    def logq(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        # 1 - e^(rho^2 - 1) = -expm1(rho^2 - 1), nonnegative on [-1, 1]
        bump = -np.expm1(rho * rho - 1.0)
        with np.errstate(divide="ignore"):
            return alpha * np.log(bump) + n * np.log1p(sign * rho)

    return logq


def _hint_points(u: CorrUncertainty) -> list[float]:
    ladder = [1.0 - c / u.n_exp for c in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)]
    return [u.sign * p for p in ladder if 0.0 < p < 1.0]


def corr_density(u: CorrUncertainty) -> CorrDensity:
    """Normalized density of the correlation estimate described by ``u``."""
    return CorrDensity(_log_unnormalized(u), _hint_points(u))


def symmetrized_corr_density(u: CorrUncertainty) -> CorrDensity:
    """Equal mixture of the two sign branches; mean zero by construction."""
    logq = _log_unnormalized(u)

    def balanced(rho: np.ndarray) -> np.ndarray:
        return np.logaddexp(logq(rho), logq(-np.asarray(rho, dtype=float))) - math.log(2.0)

    hints = _hint_points(u)
    return CorrDensity(balanced, hints + [-p for p in hints])


def corr_mean_and_ratio(density: CorrDensity) -> tuple[float, float]:
    """Mean estimate rho and the ratio expectation rho * PV<1/rho_hat>."""
    rho_mean = density.mean()
    return rho_mean, rho_mean * density.pv_inverse_mean()


@lru_cache(maxsize=4096)
def _cached_ratio(alpha: float, n_exp: int, sign: int) -> tuple[float, float]:
    return corr_mean_and_ratio(corr_density(CorrUncertainty(alpha, n_exp, sign)))


def corr_ratio_expectation(u: CorrUncertainty) -> tuple[float, float]:
    """(rho_mean, ratio) for ``u``; the ratio multiplies off-diagonal b entries.

    Qualitatively: the ratio vanishes with rho_mean, exceeds 1 for strong but
    imperfect correlation, and returns to 1 as the density collapses onto an
    endpoint.
    """
    return _cached_ratio(u.alpha, u.n_exp, u.sign)


CorrSpec = Mapping[tuple[int, int], CorrUncertainty]


def build_factors(
    drift: Sequence[DriftUncertainty],
    vol: Sequence[VolUncertainty],
    corr: CorrSpec | None = None,
) -> AdjustmentFactors:
    """Assemble the adjustment factors for N assets.

    ``corr`` maps asset-index pairs to their correlation-uncertainty models;
    missing pairs are treated as exactly known (ratio 1).  Cross-parameter
    independence is assumed throughout, so b factorizes into volatility
    moments times the correlation ratio.
    """
    n = len(drift)
    if len(vol) != n:
        raise ValueError(f"dimension mismatch: {n} drift models, {len(vol)} vol models")
    a = np.array([drift_factor(d) for d in drift])

    ratios = np.ones((n, n))
    if corr:
        seen: set[tuple[int, int]] = set()
        for (i, j), u in corr.items():
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"correlation pair ({i}, {j}) is not a valid off-diagonal pair")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"correlation pair {key} declared more than once")
            seen.add(key)
            _, ratio = corr_ratio_expectation(u)
            ratios[key[0], key[1]] = ratios[key[1], key[0]] = ratio

    single = np.array([vol_ratio_moment(v, 1) for v in vol])
    b = np.outer(single, single) * ratios
    np.fill_diagonal(b, [vol_ratio_moment(v, 2) for v in vol])
    return AdjustmentFactors(a, b)


# --- curve tables for the two diagnostic figures ----------------------------


def a_factor_curve(sigma_min: float, sigma_max: float, points: int) -> list[tuple[float, float]]:
    """(sigma, drift factor) rows over an inclusive linear sigma grid."""
    if points < 2:
        raise ValueError("points must be at least 2")
    if not (0.0 <= sigma_min < sigma_max):
        raise ValueError(f"need 0 <= min < max, got [{sigma_min}, {sigma_max}]")
    sigmas = np.linspace(sigma_min, sigma_max, points)
    return [(float(s), drift_factor(DriftUncertainty(DRIFT_UNBIASED, float(s)))) for s in sigmas]


def corr_ratio_curve(
    alpha_min: float, alpha_max: float, points: int, n_exp: int = 3, sign: int = 1
) -> list[tuple[float, float]]:
    """(rho_mean, ratio) rows swept over a log-spaced alpha grid at fixed n_exp.

    Large alpha concentrates the density near zero mean; small alpha lets the
    skew exponent push the mean toward ``sign``.  Rows are ordered by
    ascending |rho_mean| so the table plots directly.
    """
    if points < 2:
        raise ValueError("points must be at least 2")
    if not (0.0 < alpha_min < alpha_max):
        raise ValueError(f"need 0 < min < max, got [{alpha_min}, {alpha_max}]")
    alphas = np.geomspace(alpha_min, alpha_max, points)
    rows = [corr_ratio_expectation(CorrUncertainty(float(al), n_exp, sign)) for al in alphas]
    return sorted(rows, key=lambda row: abs(row[0]))
