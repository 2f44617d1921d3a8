"""Strict JSON run-configuration parsing shared by the CLI and the service.

A document names the estimated asset parameters, the per-asset uncertainty
declarations, and optional experiment settings.  Unknown keys are rejected
and every validation error carries the dotted path of the offending field.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AssetParams, RiskPreference
from .factors import (
    DRIFT_CUSTOM,
    DRIFT_DATA_MINED,
    DRIFT_KINDS,
    DRIFT_UNBIASED,
    AdjustmentFactors,
    CorrUncertainty,
    DriftUncertainty,
    VolUncertainty,
    build_factors,
)
from .optimizer import AllocationResult, adjusted_allocate, markowitz_allocate
from .simulator import DEFAULT_SEED, DEFAULT_STEPS, ExperimentConfig


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Parsed, validated run configuration."""

    names: tuple[str, ...]
    params: AssetParams
    pref: RiskPreference
    drift: tuple[DriftUncertainty, ...]
    vol: tuple[VolUncertainty, ...]
    corr_pairs: dict[tuple[int, int], CorrUncertainty] | None
    steps: int = DEFAULT_STEPS
    seed: int = DEFAULT_SEED
    dt: float = 1.0
    factor_noise: float = 0.0

    @property
    def n_assets(self) -> int:
        return len(self.names)


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected an object, got {type(node).__name__}")
    return node


def _require_list(node, path: str) -> list:
    if not isinstance(node, list):
        raise ConfigError(path, f"expected a list, got {type(node).__name__}")
    return node


def _reject_unknown(node: dict, allowed: set[str], path: str) -> None:
    for key in node:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown key")


def _number(node, path: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(node).__name__}")
    value = float(node)
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _integer(node, path: str) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(path, f"expected an integer, got {type(node).__name__}")
    return node


def _parse_assets(node, path: str) -> tuple[list[str], list[float], list[float]]:
    assets = _require_list(node, path)
    if not assets:
        raise ConfigError(path, "at least one asset is required")
    names, mu, sigma = [], [], []
    for idx, entry in enumerate(assets):
        where = f"{path}[{idx}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, {"name", "mu_hat", "sigma_hat"}, where)
        name = entry.get("name", f"asset{idx + 1}")
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where}.name", "expected a non-empty string")
        for key in ("mu_hat", "sigma_hat"):
            if key not in entry:
                raise ConfigError(f"{where}.{key}", "missing required key")
        names.append(name)
        mu.append(_number(entry["mu_hat"], f"{where}.mu_hat"))
        sigma.append(_number(entry["sigma_hat"], f"{where}.sigma_hat"))
    return names, mu, sigma


def _parse_corr(node, n: int, path: str) -> np.ndarray:
    if node is None:
        return np.eye(n)
    rows = _require_list(node, path)
    if len(rows) != n:
        raise ConfigError(path, f"expected {n} rows, got {len(rows)}")
    matrix = np.empty((n, n))
    for i, row in enumerate(rows):
        row = _require_list(row, f"{path}[{i}]")
        if len(row) != n:
            raise ConfigError(f"{path}[{i}]", f"expected {n} entries, got {len(row)}")
        for j, value in enumerate(row):
            matrix[i, j] = _number(value, f"{path}[{i}][{j}]")
    if not np.array_equal(matrix, matrix.T):
        raise ConfigError(path, "matrix must be symmetric")
    if not np.all(np.diag(matrix) == 1.0):
        raise ConfigError(path, "diagonal entries must be exactly 1")
    if np.any(np.abs(matrix) > 1.0):
        raise ConfigError(path, "entries must lie in [-1, 1]")
    return matrix


def _parse_drift(node, n: int, path: str) -> list[DriftUncertainty]:
    if node is None:
        return [DriftUncertainty() for _ in range(n)]
    entries = _require_list(node, path)
    if len(entries) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(entries)}")
    out = []
    for idx, entry in enumerate(entries):
        where = f"{path}[{idx}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, {"kind", "rel_sigma", "bias_mean", "bias_sigma"}, where)
        kind = entry.get("kind", DRIFT_UNBIASED)
        if kind not in DRIFT_KINDS:
            raise ConfigError(f"{where}.kind", f"must be one of {', '.join(DRIFT_KINDS)}")
        try:
            if kind == DRIFT_UNBIASED:
                out.append(DriftUncertainty(kind, _number(entry.get("rel_sigma", 0.0),
                                                          f"{where}.rel_sigma")))
            elif kind == DRIFT_DATA_MINED:
                out.append(DriftUncertainty(kind))
            else:
                for key in ("bias_mean", "bias_sigma"):
                    if key not in entry:
                        raise ConfigError(f"{where}.{key}", "missing required key")
                out.append(DriftUncertainty(
                    DRIFT_CUSTOM,
                    bias_mean=_number(entry["bias_mean"], f"{where}.bias_mean"),
                    bias_sigma=_number(entry["bias_sigma"], f"{where}.bias_sigma"),
                ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(where, str(exc)) from None
    return out


def _parse_vol(node, n: int, path: str) -> list[VolUncertainty]:
    if node is None:
        return [VolUncertainty() for _ in range(n)]
    entries = _require_list(node, path)
    if len(entries) != n:
        raise ConfigError(path, f"expected {n} entries, got {len(entries)}")
    out = []
    for idx, entry in enumerate(entries):
        where = f"{path}[{idx}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, {"log_sigma"}, where)
        try:
            out.append(VolUncertainty(_number(entry.get("log_sigma", 0.0), f"{where}.log_sigma")))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(where, str(exc)) from None
    return out


def _parse_corr_uncertainty(node, n: int, path: str) -> dict[tuple[int, int], CorrUncertainty] | None:
    if node is None or node == "exact":
        return None
    entries = _require_list(node, path)
    pairs: dict[tuple[int, int], CorrUncertainty] = {}
    for idx, entry in enumerate(entries):
        where = f"{path}[{idx}]"
        entry = _require_mapping(entry, where)
        _reject_unknown(entry, {"i", "j", "alpha", "n", "sign"}, where)
        for key in ("i", "j", "alpha", "n"):
            if key not in entry:
                raise ConfigError(f"{where}.{key}", "missing required key")
        i = _integer(entry["i"], f"{where}.i")
        j = _integer(entry["j"], f"{where}.j")
        if not (0 <= i < n) or not (0 <= j < n):
            raise ConfigError(where, f"asset indices must lie in [0, {n - 1}]")
        if i == j:
            raise ConfigError(where, "i and j must differ")
        key = (min(i, j), max(i, j))
        if key in pairs:
            raise ConfigError(where, f"pair {key} declared more than once")
        try:
            pairs[key] = CorrUncertainty(
                alpha=_number(entry["alpha"], f"{where}.alpha"),
                n_exp=_integer(entry["n"], f"{where}.n"),
                sign=_integer(entry.get("sign", 1), f"{where}.sign"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(where, str(exc)) from None
    return pairs


def _parse_experiment(node, path: str) -> dict:
    defaults = {"steps": DEFAULT_STEPS, "seed": DEFAULT_SEED, "dt": 1.0, "factor_noise": 0.0}
    if node is None:
        return defaults
    node = _require_mapping(node, path)
    _reject_unknown(node, set(defaults), path)
    out = dict(defaults)
    if "steps" in node:
        steps = _integer(node["steps"], f"{path}.steps")
        if steps < 1:
            raise ConfigError(f"{path}.steps", "must be at least 1")
        out["steps"] = steps
    if "seed" in node:
        seed = _integer(node["seed"], f"{path}.seed")
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"{path}.seed", "must fit in an unsigned 64-bit integer")
        out["seed"] = seed
    if "dt" in node:
        dt = _number(node["dt"], f"{path}.dt")
        if dt <= 0:
            raise ConfigError(f"{path}.dt", "must be positive")
        out["dt"] = dt
    if "factor_noise" in node:
        noise = _number(node["factor_noise"], f"{path}.factor_noise")
        if noise < 0:
            raise ConfigError(f"{path}.factor_noise", "must be nonnegative")
        out["factor_noise"] = noise
    return out


def parse_run_config(document) -> RunConfig:
    """Validate a decoded JSON document into a RunConfig."""
    document = _require_mapping(document, "")
    _reject_unknown(document, {"assets", "corr_hat", "riskless", "x", "uncertainty",
                               "experiment"}, "")
    if "assets" not in document:
        raise ConfigError("assets", "missing required key")
    names, mu, sigma = _parse_assets(document["assets"], "assets")
    n = len(names)
    corr = _parse_corr(document.get("corr_hat"), n, "corr_hat")
    riskless = _number(document.get("riskless", 0.0), "riskless")
    x = _number(document.get("x", 0.0), "x")

    unc = document.get("uncertainty")
    if unc is None:
        unc = {}
    unc = _require_mapping(unc, "uncertainty")
    _reject_unknown(unc, {"drift", "vol", "corr"}, "uncertainty")

    try:
        params = AssetParams(drifts=np.array(mu), vols=np.array(sigma), corr=corr,
                             riskless=riskless)
    except ValueError as exc:
        raise ConfigError("assets", str(exc)) from None
    try:
        pref = RiskPreference(x)
    except ValueError as exc:
        raise ConfigError("x", str(exc)) from None

    experiment = _parse_experiment(document.get("experiment"), "experiment")
    return RunConfig(
        names=tuple(names),
        params=params,
        pref=pref,
        drift=tuple(_parse_drift(unc.get("drift"), n, "uncertainty.drift")),
        vol=tuple(_parse_vol(unc.get("vol"), n, "uncertainty.vol")),
        corr_pairs=_parse_corr_uncertainty(unc.get("corr"), n, "uncertainty.corr"),
        **experiment,
    )


def adjustment_factors(rc: RunConfig) -> AdjustmentFactors:
    """Adjustment factors for the parsed uncertainty declarations."""
    return build_factors(rc.drift, rc.vol, rc.corr_pairs)


def _allocation_document(result: AllocationResult) -> dict:
    return {
        "fractions": result.fractions.tolist(),
        "c_units": result.c_units.tolist(),
        "riskless_fraction": result.riskless_fraction,
        "q_value": result.q_value,
        "du_coefficient": result.du_coefficient,
    }


def optimize_document(rc: RunConfig) -> dict:
    """Factors plus naive and adjusted allocations as one JSON-ready document."""
    factors = adjustment_factors(rc)
    adjusted = adjusted_allocate(rc.params, factors, rc.pref)
    naive = markowitz_allocate(rc.params, rc.pref)
    return {
        "assets": list(rc.names),
        "a": factors.a.tolist(),
        "b": factors.b.tolist(),
        "naive": _allocation_document(naive),
        "adjusted": _allocation_document(adjusted),
    }


def experiment_config(rc: RunConfig, *, steps: int | None = None,
                      seed: int | None = None,
                      factor_noise: float | None = None) -> ExperimentConfig:
    """Experiment settings from a run config, with optional overrides.

    The configured assets play the role of the true dynamics; drift noise
    widths come from the declared relative uncertainties.  Only unbiased
    drift declarations and exactly-known correlations define a sampling
    distribution, so anything else is rejected.
    """
    for idx, d in enumerate(rc.drift):
        if d.kind != DRIFT_UNBIASED:
            raise ConfigError(
                f"uncertainty.drift[{idx}].kind",
                "the experiment's sampling distributions require 'unbiased' drift uncertainty",
            )
        if d.rel_sigma > 0 and rc.params.excess()[idx] == 0.0:
            raise ConfigError(
                f"assets[{idx}].mu_hat",
                "drift uncertainty on a zero-excess-return asset has no sampling width",
            )
    if rc.corr_pairs:
        raise ConfigError(
            "uncertainty.corr",
            "the experiment supports only exactly-known correlations",
        )
    return ExperimentConfig(
        true_params=rc.params,
        drift_stdevs=np.array([d.rel_sigma for d in rc.drift]) * np.abs(rc.params.excess()),
        vol_log_sigmas=np.array([v.log_sigma for v in rc.vol]),
        steps=rc.steps if steps is None else steps,
        seed=rc.seed if seed is None else seed,
        pref=rc.pref,
        dt=rc.dt,
        factor_noise=rc.factor_noise if factor_noise is None else factor_noise,
    )
