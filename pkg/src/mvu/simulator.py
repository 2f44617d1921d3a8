"""Three-account Monte Carlo experiment and its robustness variant.

Each step draws fresh parameter estimates, allocates three ways (naive
face-value weights, uncertainty-adjusted weights, true-parameter weights),
applies one step of true-process returns to all three accounts, and repeats.
Sharpe ratios of the resulting log-return series measure how much of the
certainty-case performance each policy recovers.

Random draws come from named counter-based sub-streams of the experiment
seed, so the estimate draws, the return draws, and the factor-noise draws
never perturb one another and every report is bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .core import (
    AssetParams,
    NotPositiveDefiniteError,
    RiskPreference,
    SingularMatrixError,
    _freeze,
)
from .factors import DriftUncertainty, VolUncertainty, drift_factor

STREAM_ESTIMATES = 0
STREAM_RETURNS = 1
STREAM_FACTOR_NOISE = 2

DEFAULT_SEED = 1729
DEFAULT_STEPS = 100_000

ACCOUNT_LABELS = ("naive", "better", "true")


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent reproducible generator for one named draw site."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ExperimentConfig:
    """True dynamics plus the sampling distributions of their estimates.

    ``drift_stdevs`` are additive normal noise widths on the drift estimates;
    ``vol_log_sigmas`` the lognormal widths of the volatility estimates (the
    estimated correlation is taken as exactly known).  ``factor_noise`` > 0
    multiplies every adjustment-factor entry by an independent lognormal
    e^Normal(0, factor_noise) draw, modeling an investor whose uncertainty
    declarations are themselves wrong.
    """

    true_params: AssetParams
    drift_stdevs: np.ndarray
    vol_log_sigmas: np.ndarray
    steps: int = DEFAULT_STEPS
    seed: int = DEFAULT_SEED
    pref: RiskPreference = field(default_factory=RiskPreference)
    dt: float = 1.0
    factor_noise: float = 0.0
    corr_treatment: str = "exact"

    def __post_init__(self):
        n = self.true_params.n_assets
        drift_stdevs = np.array(self.drift_stdevs, dtype=float)
        vol_log_sigmas = np.array(self.vol_log_sigmas, dtype=float)
        if drift_stdevs.shape != (n,) or vol_log_sigmas.shape != (n,):
            raise ValueError(f"sampling noise arrays must have shape ({n},)")
        if np.any(drift_stdevs < 0) or np.any(vol_log_sigmas < 0):
            raise ValueError("noise levels must be nonnegative")
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if not (np.isfinite(self.factor_noise) and self.factor_noise >= 0):
            raise ValueError("factor_noise must be nonnegative")
        if self.corr_treatment != "exact":
            raise ValueError("only the 'exact' correlation treatment is supported")
        excess = self.true_params.excess()
        if np.any((drift_stdevs > 0) & (excess == 0.0)):
            raise ValueError(
                "drift noise on an asset with zero excess return leaves its relative "
                "uncertainty undefined"
            )
        _freeze(self, "drift_stdevs", drift_stdevs)
        _freeze(self, "vol_log_sigmas", vol_log_sigmas)
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "factor_noise", float(self.factor_noise))


def demo_config(steps: int = DEFAULT_STEPS, seed: int = DEFAULT_SEED, *,
                dt: float = 1.0, x: float = 0.0, factor_noise: float = 0.0) -> ExperimentConfig:
    """Two uncorrelated assets with equal 10% excess drifts and 30% vols, the
    first estimated twice as precisely as the second."""
    params = AssetParams(
        drifts=np.array([0.10, 0.10]),
        vols=np.array([0.30, 0.30]),
        corr=np.eye(2),
        riskless=0.0,
    )
    return ExperimentConfig(
        true_params=params,
        drift_stdevs=np.array([0.05, 0.10]),
        vol_log_sigmas=np.array([0.10, 0.30]),
        steps=steps,
        seed=seed,
        pref=RiskPreference(x),
        dt=dt,
        factor_noise=factor_noise,
    )


@dataclass(frozen=True)
class AccountState:
    """One account's log-return history; wealth starts at 1 and stays positive."""

    label: str
    log_returns: np.ndarray

    def __post_init__(self):
        _freeze(self, "log_returns", np.array(self.log_returns, dtype=float))

    @property
    def log_wealth(self) -> float:
        return float(self.log_returns.sum())

    @property
    def wealth(self) -> float:
        # Long profitable runs overflow the float range; inf is the honest cap.
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_returns.sum()))

    def wealth_path(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(np.cumsum(self.log_returns))

    @property
    def mean(self) -> float:
        return float(self.log_returns.mean())

    @property
    def stdev(self) -> float:
        return float(self.log_returns.std())


@dataclass(frozen=True)
class ExperimentReport:
    """Sharpe ratios and return statistics for the three accounts, plus the
    realized adjustment factors and the seed that produced it all."""

    naive: AccountState
    better: AccountState
    true: AccountState
    sharpe_naive: float
    sharpe_better: float
    sharpe_true: float
    a: np.ndarray
    b: np.ndarray
    seed: int
    steps: int
    dt: float
    x: float
    riskless: float

    def __post_init__(self):
        _freeze(self, "a", np.array(self.a, dtype=float))
        _freeze(self, "b", np.array(self.b, dtype=float))

    def accounts(self) -> tuple[AccountState, AccountState, AccountState]:
        return self.naive, self.better, self.true

    def sharpes(self) -> dict[str, float]:
        return {
            "naive": self.sharpe_naive,
            "better": self.sharpe_better,
            "true": self.sharpe_true,
        }

    def to_document(self) -> dict:
        def finite(value: float):
            # A one-step series has no spread; JSON carries null, not NaN.
            return value if math.isfinite(value) else None

        return {
            "steps": self.steps,
            "seed": self.seed,
            "dt": self.dt,
            "x": self.x,
            "riskless": self.riskless,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "accounts": {
                acct.label: {
                    "sharpe": finite(self.sharpes()[acct.label]),
                    "mean": acct.mean,
                    "stdev": acct.stdev,
                    "log_final_wealth": acct.log_wealth,
                }
                for acct in self.accounts()
            },
        }


@dataclass(frozen=True)
class RobustnessTrial:
    """One perturbed-factor trial; failed trials are recorded, never dropped."""

    index: int
    seed: int
    status: str  # "ok" | "not_positive_definite"
    report: ExperimentReport | None = None
    detail: str = ""


def draw_estimate_batch(cfg: ExperimentConfig, rng: np.random.Generator,
                        count: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` rows of (drift estimates, vol estimates), in stream order:
    all drift noise first, then all volatility noise."""
    params = cfg.true_params
    drift_noise = rng.normal(0.0, 1.0, size=(count, params.n_assets)) * cfg.drift_stdevs
    log_noise = rng.normal(0.0, 1.0, size=(count, params.n_assets)) * cfg.vol_log_sigmas
    mu_hat = params.drifts + drift_noise
    vol_hat = params.vols * np.exp(-0.5 * cfg.vol_log_sigmas**2 + log_noise)
    return mu_hat, vol_hat


def draw_estimates(cfg: ExperimentConfig, rng: np.random.Generator) -> AssetParams:
    """One draw of estimated parameters; correlation is carried over exactly."""
    mu_hat, vol_hat = draw_estimate_batch(cfg, rng, 1)
    return AssetParams(
        drifts=mu_hat[0],
        vols=vol_hat[0],
        corr=cfg.true_params.corr,
        riskless=cfg.true_params.riskless,
    )


def _corr_factor(corr: np.ndarray) -> np.ndarray:
    """Factor L with L L^T = corr; tolerates positive semidefinite inputs."""
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(corr)
        if np.min(eigvals) < -1e-10 * max(np.max(eigvals), 1.0):
            raise NotPositiveDefiniteError(
                "correlation matrix is not positive semidefinite; cannot factor returns"
            ) from None
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def step_return_batch(params: AssetParams, dt: float, rng: np.random.Generator,
                      count: int) -> np.ndarray:
    """``count`` rows of one-step arithmetic returns mu*dt + sigma*sqrt(dt)*z
    with z correlated per the correlation matrix."""
    factor = _corr_factor(params.corr)
    z = rng.standard_normal((count, params.n_assets)) @ factor.T
    return params.drifts * dt + params.vols * math.sqrt(dt) * z


def step_returns(params: AssetParams, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One step of correlated returns generated from the true parameters."""
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError("dt must be positive")
    return step_return_batch(params, dt, rng, 1)[0]


def sampling_factors(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Adjustment factors implied by the declared sampling distributions.

    Drift deflators come from the relative uncertainty drift_stdev/(mu - r);
    risk inflators from the lognormal vol widths, with the exactly-known
    correlation contributing ratio 1.  Computed once per experiment, not
    re-estimated per step.
    """
    rel = np.divide(
        cfg.drift_stdevs,
        cfg.true_params.excess(),
        out=np.zeros_like(cfg.drift_stdevs),
        where=cfg.drift_stdevs > 0,
    )
    a = np.array([drift_factor(DriftUncertainty(rel_sigma=abs(r))) for r in rel])
    single = np.exp(cfg.vol_log_sigmas**2)
    b = np.outer(single, single)
    np.fill_diagonal(b, np.exp(3.0 * cfg.vol_log_sigmas**2))
    return a, b


def _perturb_factors(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
                     level: float) -> tuple[np.ndarray, np.ndarray]:
    # Independent multiplicative e^Normal(0, level) on every entry; the b
    # perturbation is drawn on the upper triangle and mirrored to stay
    # symmetric.
    n = a.size
    a = a * np.exp(rng.normal(0.0, level, size=n))
    shocks = rng.normal(0.0, level, size=(n, n))
    upper = np.triu(shocks)
    symmetric = upper + np.triu(shocks, 1).T
    return a, b * np.exp(symmetric)


def _batch_fractions(mu_hat: np.ndarray, vol_hat: np.ndarray, corr: np.ndarray,
                     a: np.ndarray, b: np.ndarray, pref: RiskPreference,
                     riskless: float, label: str) -> np.ndarray:
    # The c-unit system (S_hat outer S_hat * corr * b) c = S_hat^2 * a reduces,
    # through the diagonal similarity D = diag(S_hat), to the fixed system
    # (corr * b) y = S_hat * a with fractions y / vol_hat / (1 - x); one
    # factorization then serves every step.
    scaled = corr * b
    try:
        cho = scipy.linalg.cho_factor(scaled)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            f"{label} allocation: scaled quadratic form is not positive definite"
        ) from None
    sharpe_hat = (mu_hat - riskless) / vol_hat
    solved = scipy.linalg.cho_solve(cho, (sharpe_hat * a).T).T
    fractions = pref.aversion * solved / vol_hat
    if not np.all(np.isfinite(fractions)):
        bad = int(np.argwhere(~np.isfinite(fractions).all(axis=1))[0][0])
        raise SingularMatrixError(f"{label} allocation failed at step {bad}")
    return fractions


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full loop and report per-account Sharpe statistics.

    Estimates are redrawn every step; the adjustment factors are fixed up
    front from the declared sampling distributions (perturbed once when
    ``factor_noise`` > 0).  Deterministic for a fixed config including seed.
    """
    params = cfg.true_params
    mu_hat, vol_hat = draw_estimate_batch(cfg, stream(cfg.seed, STREAM_ESTIMATES), cfg.steps)
    returns = step_return_batch(params, cfg.dt, stream(cfg.seed, STREAM_RETURNS), cfg.steps)

    a, b = sampling_factors(cfg)
    if cfg.factor_noise > 0:
        a, b = _perturb_factors(a, b, stream(cfg.seed, STREAM_FACTOR_NOISE), cfg.factor_noise)

    n = params.n_assets
    unit_a, unit_b = np.ones(n), np.ones((n, n))
    truth = (params.drifts[None, :], params.vols[None, :])
    f_naive = _batch_fractions(mu_hat, vol_hat, params.corr, unit_a, unit_b,
                               cfg.pref, params.riskless, "naive")
    f_better = _batch_fractions(mu_hat, vol_hat, params.corr, a, b,
                                cfg.pref, params.riskless, "better")
    f_true = _batch_fractions(*truth, params.corr, unit_a, unit_b,
                              cfg.pref, params.riskless, "true")[0]

    # One reduction expression for all three accounts so identical fractions
    # give bit-identical return series.
    series = {
        "naive": (f_naive * returns).sum(axis=1),
        "better": (f_better * returns).sum(axis=1),
        "true": (f_true[None, :] * returns).sum(axis=1),
    }
    accounts = {label: AccountState(label, series[label]) for label in ACCOUNT_LABELS}
    annualize = math.sqrt(1.0 / cfg.dt)

    def sharpe(acct: AccountState) -> float:
        spread = acct.stdev
        if spread == 0.0:
            return math.nan
        return (acct.mean - params.riskless * cfg.dt) / spread * annualize

    return ExperimentReport(
        naive=accounts["naive"],
        better=accounts["better"],
        true=accounts["true"],
        sharpe_naive=sharpe(accounts["naive"]),
        sharpe_better=sharpe(accounts["better"]),
        sharpe_true=sharpe(accounts["true"]),
        a=a,
        b=b,
        seed=cfg.seed,
        steps=cfg.steps,
        dt=cfg.dt,
        x=cfg.pref.x,
        riskless=params.riskless,
    )


def run_robustness(cfg: ExperimentConfig, trials: int,
                   factor_noise: float) -> list[RobustnessTrial]:
    """Repeat the experiment with independently perturbed adjustment factors.

    Trial k runs under seed cfg.seed + k; with factor_noise = 0 each trial is
    exactly the plain experiment for its seed.  Trials whose perturbed factors
    destroy concavity are recorded with status "not_positive_definite".
    """
    if trials < 1:
        raise ValueError("trials must be a positive integer")
    if not (np.isfinite(factor_noise) and factor_noise >= 0):
        raise ValueError("factor_noise must be nonnegative")
    out: list[RobustnessTrial] = []
    for k in range(trials):
        sub = replace(cfg, seed=cfg.seed + k, factor_noise=factor_noise)
        try:
            report = run_experiment(sub)
        except NotPositiveDefiniteError as exc:
            out.append(RobustnessTrial(k, sub.seed, "not_positive_definite", None, str(exc)))
        else:
            out.append(RobustnessTrial(k, sub.seed, "ok", report))
    return out
