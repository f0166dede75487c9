"""Run-configuration files for the command line.

A run is described by one YAML file with sections for data, universe, risk
model, constraints, strategy, and backtest. The file is validated against
the schema below at startup; unknown keys are rejected so typos fail fast.
Parsing then re-serializing a config is idempotent once defaults are
applied. See the README for the documented grammar.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError
from .marketdata import CATEGORIES

_TOP_KEYS = {"name", "data", "universe", "risk_model", "constraints", "strategy", "backtest"}

DEFAULTS = {
    "risk_model": {"vol_half_life": 63.0, "corr_half_life": 125.0},
    "constraints": {"annual_vol_cap": 0.10, "category_caps": {}, "asset_caps": {}},
    "backtest": {"burn_in": 250, "annualization_days": 250, "start": None, "end": None},
}

_STRATEGY_DEFAULTS = {
    "cra": {"rho": "equal", "use_variation": True, "variation_half_life": 10.0},
    "dd9010": {
        "relative_weights": "default",
        "vol_estimator": {"kind": "ewma", "half_life": 10.0},
    },
}

_ESTIMATOR_DEFAULTS = {
    "ewma": {"half_life": 10.0},
    "garch": {"window": 250, "refit_every": 1},
}


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"config key '{path}': {message}")


def _expect_map(obj: Any, path: str, allowed: set) -> dict:
    _require(isinstance(obj, dict), path, f"expected a mapping, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    _require(not unknown, path, f"unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")
    return obj

def _expect_str(obj: Any, path: str) -> str:
    _require(isinstance(obj, str) and obj != "", path, "expected a non-empty string")
    return obj

def _expect_number(obj: Any, path: str, positive: bool = True) -> float:
    _require(isinstance(obj, (int, float)) and not isinstance(obj, bool), path, "expected a number")
    if positive:
        _require(obj > 0, path, f"must be > 0, got {obj}")
    return float(obj)

def _expect_int(obj: Any, path: str, minimum: int = 0) -> int:
    _require(isinstance(obj, int) and not isinstance(obj, bool), path, "expected an integer")
    _require(obj >= minimum, path, f"must be >= {minimum}, got {obj}")
    return obj

def _expect_bool(obj: Any, path: str) -> bool:
    _require(isinstance(obj, bool), path, "expected true or false")
    return obj

def _expect_date(obj: Any, path: str):
    if obj is None:
        return None
    import datetime

    if isinstance(obj, datetime.date):
        return obj.isoformat()
    _require(isinstance(obj, str), path, "expected an ISO date or null")
    try:
        datetime.date.fromisoformat(obj)
    except ValueError as exc:
        raise ConfigError(f"config key '{path}': bad date {obj!r}: {exc}") from exc
    return obj


def _validate_data(data: Any) -> dict:
    data = _expect_map(
        data, "data",
        {"kind", "prices", "assets", "n_days", "seed", "correlation", "synthetic_assets", "start"},
    )
    kind = _expect_str(data.get("kind", "csv"), "data.kind")
    _require(kind in ("csv", "synthetic"), "data.kind", "must be 'csv' or 'synthetic'")
    out = {"kind": kind}
    if kind == "csv":
        out["prices"] = _expect_str(data.get("prices"), "data.prices") if data.get("prices") else "prices.csv"
        out["assets"] = _expect_str(data.get("assets"), "data.assets") if data.get("assets") else "assets.csv"
        extra = set(data) - {"kind", "prices", "assets"}
        _require(not extra, "data", f"keys {sorted(extra)} only apply to synthetic data")
    else:
        out["n_days"] = _expect_int(data.get("n_days", 600), "data.n_days", minimum=10)
        out["seed"] = _expect_int(data.get("seed", 0), "data.seed")
        out["start"] = _expect_date(data.get("start", "2020-01-01"), "data.start")
        corr = data.get("correlation", 0.0)
        if isinstance(corr, list):
            out["correlation"] = [[float(v) for v in row] for row in corr]
        else:
            out["correlation"] = _expect_number(corr, "data.correlation", positive=False)
        assets = data.get("synthetic_assets")
        _require(isinstance(assets, list) and assets, "data.synthetic_assets", "expected a non-empty list")
        out_assets = []
        for k, entry in enumerate(assets):
            entry = _expect_map(entry, f"data.synthetic_assets[{k}]", {"asset_id", "category", "vol_daily"})
            out_assets.append({
                "asset_id": _expect_str(entry.get("asset_id"), f"data.synthetic_assets[{k}].asset_id"),
                "category": _expect_str(entry.get("category"), f"data.synthetic_assets[{k}].category"),
                "vol_daily": _expect_number(entry.get("vol_daily"), f"data.synthetic_assets[{k}].vol_daily"),
            })
            _require(
                out_assets[-1]["category"] in CATEGORIES,
                f"data.synthetic_assets[{k}].category", f"must be one of {CATEGORIES}",
            )
        out["synthetic_assets"] = out_assets
    return out


def _validate_strategy(strategy: Any) -> dict:
    strategy = _expect_map(
        strategy, "strategy",
        {"kind", "rho", "use_variation", "variation_half_life", "relative_weights", "vol_estimator"},
    )
    kind = _expect_str(strategy.get("kind"), "strategy.kind") if strategy.get("kind") else ""
    _require(kind in ("cra", "dd9010"), "strategy.kind", "must be 'cra' or 'dd9010'")
    merged = copy.deepcopy(_STRATEGY_DEFAULTS[kind])
    for key, value in strategy.items():
        if key == "kind":
            continue
        _require(key in merged, f"strategy.{key}", f"not a {kind} strategy key")
        merged[key] = value
    out = {"kind": kind}
    if kind == "cra":
        rho = merged["rho"]
        if rho != "equal":
            _require(isinstance(rho, list) and rho, "strategy.rho", "must be 'equal' or a list")
            rho = [_expect_number(v, "strategy.rho[]") for v in rho]
        out["rho"] = rho
        out["use_variation"] = _expect_bool(merged["use_variation"], "strategy.use_variation")
        out["variation_half_life"] = _expect_number(merged["variation_half_life"], "strategy.variation_half_life")
    else:
        rel = merged["relative_weights"]
        if rel != "default":
            _require(isinstance(rel, list) and rel, "strategy.relative_weights", "must be 'default' or a list")
            rel = [float(_expect_number(v, "strategy.relative_weights[]", positive=False)) for v in rel]
        out["relative_weights"] = rel
        est = _expect_map(merged["vol_estimator"], "strategy.vol_estimator", {"kind", "half_life", "window", "refit_every"})
        est_kind = _expect_str(est.get("kind", "ewma"), "strategy.vol_estimator.kind")
        _require(est_kind in ("ewma", "garch"), "strategy.vol_estimator.kind", "must be 'ewma' or 'garch'")
        est_out = {"kind": est_kind} | copy.deepcopy(_ESTIMATOR_DEFAULTS[est_kind])
        for key, value in est.items():
            if key == "kind":
                continue
            _require(key in est_out, f"strategy.vol_estimator.{key}", f"not a {est_kind} estimator key")
            est_out[key] = value
        if est_kind == "ewma":
            est_out["half_life"] = _expect_number(est_out["half_life"], "strategy.vol_estimator.half_life")
        else:
            est_out["window"] = _expect_int(est_out["window"], "strategy.vol_estimator.window", minimum=50)
            est_out["refit_every"] = _expect_int(est_out["refit_every"], "strategy.vol_estimator.refit_every", minimum=1)
        out["vol_estimator"] = est_out
    return out


def validate_config(cfg: Any, source: str = "<config>") -> dict:
    """Validate a parsed config mapping and fill in defaults."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown top-level keys {sorted(unknown)}")

    out: dict = {"name": _expect_str(cfg.get("name", "run"), "name")}
    out["data"] = _validate_data(cfg.get("data", {"kind": "csv"}))

    universe = cfg.get("universe")
    if universe is not None:
        _require(isinstance(universe, list) and universe, "universe", "expected a non-empty list")
        out["universe"] = [_expect_str(a, "universe[]") for a in universe]
    else:
        out["universe"] = None

    rm = _expect_map(cfg.get("risk_model", {}), "risk_model", set(DEFAULTS["risk_model"]))
    out["risk_model"] = {
        "vol_half_life": _expect_number(rm.get("vol_half_life", DEFAULTS["risk_model"]["vol_half_life"]), "risk_model.vol_half_life"),
        "corr_half_life": _expect_number(rm.get("corr_half_life", DEFAULTS["risk_model"]["corr_half_life"]), "risk_model.corr_half_life"),
    }

    cons = _expect_map(cfg.get("constraints", {}), "constraints", set(DEFAULTS["constraints"]))
    category_caps = cons.get("category_caps", {}) or {}
    _require(isinstance(category_caps, dict), "constraints.category_caps", "expected a mapping")
    for cat, cap in category_caps.items():
        _require(cat in CATEGORIES, f"constraints.category_caps.{cat}", f"must be one of {CATEGORIES}")
        _expect_number(cap, f"constraints.category_caps.{cat}")
    asset_caps = cons.get("asset_caps", {}) or {}
    _require(isinstance(asset_caps, dict), "constraints.asset_caps", "expected a mapping")
    for aid, cap in asset_caps.items():
        _expect_number(cap, f"constraints.asset_caps.{aid}")
    out["constraints"] = {
        "annual_vol_cap": _expect_number(cons.get("annual_vol_cap", DEFAULTS["constraints"]["annual_vol_cap"]), "constraints.annual_vol_cap"),
        "category_caps": {k: float(v) for k, v in category_caps.items()},
        "asset_caps": {k: float(v) for k, v in asset_caps.items()},
    }

    out["strategy"] = _validate_strategy(cfg.get("strategy", {"kind": "cra"}))

    bt = _expect_map(cfg.get("backtest", {}), "backtest", set(DEFAULTS["backtest"]))
    out["backtest"] = {
        "burn_in": _expect_int(bt.get("burn_in", DEFAULTS["backtest"]["burn_in"]), "backtest.burn_in"),
        "annualization_days": _expect_int(bt.get("annualization_days", DEFAULTS["backtest"]["annualization_days"]), "backtest.annualization_days", minimum=1),
        "start": _expect_date(bt.get("start"), "backtest.start"),
        "end": _expect_date(bt.get("end"), "backtest.end"),
    }
    return out


def load_config(path) -> dict:
    """Parse and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return validate_config(raw, source=str(path))


def dump_config(cfg: dict) -> str:
    """Serialize a validated config; stable key order for reproducibility."""
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def daily_vol_cap(cfg: dict) -> float:
    """Translate the annualized volatility cap into daily units."""
    return cfg["constraints"]["annual_vol_cap"] / float(
        np.sqrt(cfg["backtest"]["annualization_days"])
    )
