"""Daily-rebalanced backtest engine and performance metrics.

Timing convention: weights are decided at the close of trading date t using
information through t (covariance estimate, estimator states fed with
returns through t) and earn the return from t to t+1. No information from
t+1 ever enters the decision at t. Cash earns zero.

Metrics follow the annualized conventions: return ``(D/T) * sum(p)``,
volatility ``sqrt((D/T) * sum((p - mean(p))**2))`` with the per-period mean,
Sharpe as their ratio, and drawdown as the maximum fractional drop of the
compounded value path from a prior peak. All but Sharpe are reported in
percent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .cra import PortfolioWeights
from .errors import ConfigError, ParameterError
from .marketdata import DateLike, ReturnPanel, _as_timestamp
from .riskmodels import CovarianceSeries
from .strategies import StrategyConfig, build_strategy

SUMMARY_KEYS = ("return_pct", "volatility_pct", "sharpe", "max_drawdown_pct", "avg_cash_pct")


@dataclass(frozen=True)
class BacktestConfig:
    burn_in: int = 250
    annualization_days: int = 250
    start: Optional[DateLike] = None
    end: Optional[DateLike] = None
    strategy: Optional[StrategyConfig] = None

    def __post_init__(self):
        if self.burn_in < 0:
            raise ConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.annualization_days <= 0:
            raise ConfigError("annualization_days must be > 0")


@dataclass(frozen=True)
class BacktestResult:
    """Weight trajectory, realized returns, value path, and summaries."""

    asset_ids: tuple[str, ...]
    decision_dates: pd.DatetimeIndex   # date each weight vector was formed
    realization_dates: pd.DatetimeIndex  # date each return accrued
    weights: np.ndarray   # (T, n)
    cash: np.ndarray      # (T,)
    returns: np.ndarray   # (T,) realized portfolio returns
    values: np.ndarray    # (T+1,) compounded value path, values[0] = 1
    annualization_days: int

    @property
    def summary(self) -> dict:
        p, d = self.returns, self.annualization_days
        return {
            "return_pct": annualized_return(p, d),
            "volatility_pct": annualized_volatility(p, d),
            "sharpe": sharpe_ratio(p, d),
            "max_drawdown_pct": max_drawdown(self.values),
            "avg_cash_pct": float(np.mean(self.cash)) * 100.0,
        }

    def value_series(self) -> pd.Series:
        """Value path indexed by date (initial value at the first decision date)."""
        idx = self.decision_dates[:1].append(self.realization_dates)
        return pd.Series(self.values, index=idx, name="value")


def annualized_return(p, annualization_days: int) -> float:
    """(D/T) * sum(p), in percent."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise ParameterError("return series is empty")
    return 100.0 * annualization_days * float(np.sum(p)) / p.size


def annualized_volatility(p, annualization_days: int) -> float:
    """sqrt((D/T) * sum((p - mean)^2)), in percent."""
    p = np.asarray(p, dtype=float)
    if p.size < 2:
        raise ParameterError("volatility needs at least two returns")
    if p.max() == p.min():  # constant series: exactly zero, not mean-rounding noise
        return 0.0
    dev = p - p.mean()
    return 100.0 * math.sqrt(annualization_days * float(np.sum(dev * dev)) / p.size)


def sharpe_ratio(p, annualization_days: int) -> float:
    """Annualized return over annualized volatility; NaN when volatility is zero."""
    vol = annualized_volatility(p, annualization_days)
    if vol == 0.0:
        return float("nan")
    return annualized_return(p, annualization_days) / vol


def max_drawdown(values) -> float:
    """Largest fractional drop from a prior peak, in percent. O(T)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("value path is empty")
    if not np.isfinite(v).all() or (v <= 0.0).any():
        raise ParameterError("value path must be positive and finite")
    peak = v[0]
    worst = 0.0
    for value in v[1:]:
        if value > peak:
            peak = value
        else:
            dd = 1.0 - value / peak
            if dd > worst:
                worst = dd
    return 100.0 * float(worst)


def annual_breakdown(result: BacktestResult) -> pd.DataFrame:
    """Per-calendar-year return, volatility, and Sharpe (same formulas)."""
    d = result.annualization_days
    rows = []
    years = result.realization_dates.year
    for year in sorted(set(years)):
        p = result.returns[years == year]
        ret = annualized_return(p, d)
        vol = annualized_volatility(p, d) if p.size >= 2 else float("nan")
        sharpe = (ret / vol) if vol > 0.0 else float("nan")
        rows.append({"year": int(year), "return_pct": ret, "volatility_pct": vol, "sharpe": sharpe})
    return pd.DataFrame(rows).set_index("year")


def run_backtest(
    panel: ReturnPanel,
    cov: Optional[CovarianceSeries],
    config: BacktestConfig,
    strategy=None,
) -> BacktestResult:
    """Simulate one strategy over a return panel.

    ``cov`` must be aligned to the panel dates (pass None for strategies
    that do not consume a covariance). ``strategy`` overrides the one built
    from ``config.strategy``; it must expose ``step(date, returns_row,
    sigma) -> PortfolioWeights | None`` and a ``needs_covariance`` flag.
    """
    if cov is not None:
        if len(cov) != len(panel) or not (cov.dates == panel.dates).all():
            raise ConfigError("covariance series is not aligned to the panel dates")
        if cov.asset_ids != panel.asset_ids:
            raise ConfigError("covariance assets do not match the panel")

    if config.start is not None or config.end is not None:
        keep = np.ones(len(panel), dtype=bool)
        if config.start is not None:
            keep &= panel.dates >= _as_timestamp(config.start)
        if config.end is not None:
            keep &= panel.dates <= _as_timestamp(config.end)
        panel = ReturnPanel(frame=panel.frame.loc[keep], meta=panel.meta)
        if cov is not None:
            cov = cov.slice_mask(keep)

    if strategy is None:
        if config.strategy is None:
            raise ConfigError("no strategy given")
        strategy = build_strategy(config.strategy)

    rets = panel.values
    dates = panel.dates
    T, n = rets.shape
    burn_in = config.burn_in
    if T - 1 - burn_in < 2:
        raise ConfigError(
            f"burn_in={burn_in} leaves fewer than two tradable days in a "
            f"{T}-date panel"
        )
    if strategy.needs_covariance:
        if cov is None:
            raise ConfigError("strategy requires a covariance series")
        if not cov.mature[burn_in]:
            raise ConfigError(
                "covariance estimate still immature at the first trading day; "
                "increase burn_in or shorten the estimator half-life"
            )

    weights = np.empty((T - 1 - burn_in, n))
    cash = np.empty(T - 1 - burn_in)
    realized = np.empty(T - 1 - burn_in)
    for k in range(T - 1):
        sigma_k = cov.sigmas[k] if cov is not None else None
        target = strategy.step(dates[k], rets[k], sigma_k)
        if k < burn_in:
            continue
        if target is None:
            target = PortfolioWeights.all_cash(n)
        i = k - burn_in
        weights[i] = target.w
        cash[i] = target.c
        realized[i] = float(target.w @ rets[k + 1])

    values = np.empty(len(realized) + 1)
    values[0] = 1.0
    np.cumprod(1.0 + realized, out=values[1:])
    return BacktestResult(
        asset_ids=panel.asset_ids,
        decision_dates=dates[burn_in : T - 1],
        realization_dates=dates[burn_in + 1 : T],
        weights=weights,
        cash=cash,
        returns=realized,
        values=values,
        annualization_days=config.annualization_days,
    )


class FixedWeightsStrategy:
    """Hold a constant weight vector; mainly for tests and baselines."""

    needs_covariance = False

    def __init__(self, weights: PortfolioWeights):
        self.target = weights

    def step(self, date, returns_row, sigma=None) -> PortfolioWeights:
        return self.target


# ---------------------------------------------------------------------------
# Artifact writers. Numeric CSV cells use 6 significant digits so that
# committed golden files stay stable across platforms.
# ---------------------------------------------------------------------------

CSV_FLOAT_FORMAT = "%.6g"


def format_cell(value: float, fmt: str = CSV_FLOAT_FORMAT) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return fmt % value


def write_summary_json(result: BacktestResult, path, name: str = "") -> None:
    summary = {
        k: (None if isinstance(v, float) and math.isnan(v) else v)
        for k, v in result.summary.items()
    }
    payload = {
        "name": name,
        "first_decision_date": result.decision_dates[0].date().isoformat(),
        "last_realization_date": result.realization_dates[-1].date().isoformat(),
        "trading_days": int(len(result.returns)),
        "metrics": summary,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_weights_csv(result: BacktestResult, path) -> None:
    """Per decision date: weights, cash, realized return, value after it."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *result.asset_ids, "cash", "portfolio_return", "value"])
        for t, day in enumerate(result.decision_dates):
            writer.writerow(
                [day.date().isoformat()]
                + [format_cell(v) for v in result.weights[t]]
                + [
                    format_cell(result.cash[t]),
                    format_cell(result.returns[t]),
                    format_cell(result.values[t + 1]),
                ]
            )


def write_values_csv(result: BacktestResult, path) -> None:
    series = result.value_series()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for day, value in series.items():
            writer.writerow([day.date().isoformat(), format_cell(value)])


def write_annual_csv(result: BacktestResult, path) -> None:
    table = annual_breakdown(result)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "return_pct", "volatility_pct", "sharpe"])
        for year, row in table.iterrows():
            writer.writerow(
                [year]
                + [format_cell(row[k]) for k in ("return_pct", "volatility_pct", "sharpe")]
            )
