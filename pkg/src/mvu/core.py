"""Shared domain types and small dense symmetric linear-algebra kernels.

Everything here is immutable after construction and free of hidden state, so
instances and functions are safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class PortfolioMathError(Exception):
    """Base class for numerical failures surfaced to callers."""


class SingularMatrixError(PortfolioMathError):
    """Factorization pivots collapsed; the system has no reliable solution."""


class NotPositiveDefiniteError(PortfolioMathError):
    """A quadratic form that must be positive definite is not."""


def _freeze(obj, name: str, value: np.ndarray) -> None:
    value.setflags(write=False)
    object.__setattr__(obj, name, value)


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class AssetParams:
    """Annualized drift/volatility/correlation description of N risky assets.

    The same type carries either true parameters or point estimates; which
    role it plays is up to the caller.  All rates are annualized decimals
    (0.10, not 10).
    """

    drifts: np.ndarray
    vols: np.ndarray
    corr: np.ndarray
    riskless: float = 0.0

    def __post_init__(self):
        drifts = _as_vector(self.drifts, "drifts")
        vols = _as_vector(self.vols, "vols")
        corr = _as_matrix(self.corr, "corr")
        n = drifts.size
        if vols.size != n or corr.shape != (n, n):
            raise ValueError(
                f"dimension mismatch: {n} drifts, {vols.size} vols, corr {corr.shape}"
            )
        if np.any(vols <= 0):
            raise ValueError("vols must be strictly positive")
        if not np.array_equal(corr, corr.T):
            raise ValueError("corr must be symmetric")
        if not np.all(np.diag(corr) == 1.0):
            raise ValueError("corr diagonal must be exactly 1")
        if np.any(np.abs(corr) > 1.0):
            raise ValueError("corr entries must lie in [-1, 1]")
        if not np.isfinite(self.riskless):
            raise ValueError("riskless must be finite")
        _freeze(self, "drifts", drifts)
        _freeze(self, "vols", vols)
        _freeze(self, "corr", corr)
        object.__setattr__(self, "riskless", float(self.riskless))

    @property
    def n_assets(self) -> int:
        return self.drifts.size

    def excess(self) -> np.ndarray:
        """Excess drifts over the riskless rate."""
        return self.drifts - self.riskless


@dataclass(frozen=True)
class RiskPreference:
    """Power-law utility exponent; x < 1, with x -> 0 the log-utility limit."""

    x: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.x) or self.x >= 1.0:
            raise ValueError(f"utility exponent must be finite and < 1, got {self.x}")
        object.__setattr__(self, "x", float(self.x))

    @property
    def aversion(self) -> float:
        """The 1/(1-x) leverage scale of every optimal allocation."""
        return 1.0 / (1.0 - self.x)


@dataclass(frozen=True)
class SharpeVector:
    """Per-asset Sharpe ratios, (drift - riskless) / vol."""

    values: np.ndarray

    def __post_init__(self):
        _freeze(self, "values", _as_vector(self.values, "values"))


@dataclass(frozen=True)
class SharpeQuadratic:
    """Coefficients of the allocation objective in natural units.

    ``matrix[i, j] = S_i * S_j * corr[i, j]`` is the quadratic-form matrix and
    ``diag`` its diagonal (the squared Sharpe ratios), which is also the
    linear-term vector of the objective.
    """

    matrix: np.ndarray
    diag: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        matrix = _as_matrix(self.matrix, "matrix")
        diag = np.diagonal(matrix).copy() if self.diag is None else _as_vector(self.diag, "diag")
        if diag.size != matrix.shape[0]:
            raise ValueError("diag length must match matrix dimension")
        if not np.array_equal(matrix, matrix.T):
            raise ValueError("matrix must be symmetric")
        if not np.array_equal(diag, np.diagonal(matrix)):
            raise ValueError("diag must equal the matrix diagonal exactly")
        if np.any(diag < 0):
            raise ValueError("diagonal entries are squared Sharpe ratios and cannot be negative")
        _freeze(self, "matrix", matrix)
        _freeze(self, "diag", diag)


def sharpe_vector(params: AssetParams) -> SharpeVector:
    """Per-asset Sharpe ratios of ``params``."""
    return SharpeVector(params.excess() / params.vols)


def sharpe_quadratic(params: AssetParams) -> SharpeQuadratic:
    """Quadratic-form coefficients of the allocation objective for ``params``."""
    s = sharpe_vector(params).values
    return SharpeQuadratic(np.outer(s, s) * params.corr)


def hadamard(a, b):
    """Elementwise product of two same-shape arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def _ldl_pivots(d: np.ndarray) -> list[float]:
    # Eigenvalues of the 1x1 / 2x2 blocks of the LDL^T block-diagonal factor.
    n = d.shape[0]
    pivots: list[float] = []
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            a, b, c = d[i, i], d[i + 1, i], d[i + 1, i + 1]
            half_tr = 0.5 * (a + c)
            disc = np.sqrt(max(half_tr * half_tr - (a * c - b * b), 0.0))
            pivots.extend((half_tr - disc, half_tr + disc))
            i += 2
        else:
            pivots.append(d[i, i])
            i += 1
    return pivots


# Pivot threshold relative to the largest diagonal entry, and the residual
# contract every returned solution must meet.
PIVOT_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10


def solve_symmetric(m, v, *, require_positive_definite: bool = True) -> np.ndarray:
    """Solve m @ w = v for symmetric m without materializing an inverse.

    Uses a symmetric indefinite (LDL^T) factorization to classify the matrix,
    then solves and applies one step of iterative refinement.  Raises
    SingularMatrixError when any pivot magnitude falls below
    ``PIVOT_RTOL * max |diag(m)|`` or the residual contract cannot be met, and
    NotPositiveDefiniteError when ``require_positive_definite`` is set and a
    pivot is non-positive (the objective would not be concave).
    """
    m = _as_matrix(m, "m")
    v = _as_vector(v, "v")
    if v.size != m.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {m.shape}, vector {v.shape}")
    if not np.array_equal(m, m.T):
        raise ValueError("m must be symmetric")

    scale = float(np.max(np.abs(np.diagonal(m))))
    if scale == 0.0:
        raise SingularMatrixError("matrix diagonal is identically zero")
    _, d, _ = scipy.linalg.ldl(m)
    pivots = _ldl_pivots(d)
    if min(abs(p) for p in pivots) < PIVOT_RTOL * scale:
        raise SingularMatrixError(
            f"pivot below {PIVOT_RTOL:g} x max diagonal ({scale:g}); matrix is numerically singular"
        )
    if require_positive_definite and min(pivots) <= 0.0:
        raise NotPositiveDefiniteError(
            "quadratic-form matrix is not positive definite; the objective has no unique maximum"
        )

    w = scipy.linalg.solve(m, v, assume_a="sym")
    w = w + scipy.linalg.solve(m, v - m @ w, assume_a="sym")
    v_norm = float(np.linalg.norm(v))
    residual = float(np.linalg.norm(m @ w - v))
    if residual > RESIDUAL_RTOL * (v_norm if v_norm > 0 else 1.0):
        raise SingularMatrixError(
            f"solution residual {residual:.3e} exceeds the {RESIDUAL_RTOL:g} relative contract"
        )
    return w
