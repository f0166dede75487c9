"""Daily target-weight strategies behind a common step interface.

Two strategies are provided:

* constrained risk allocation, rebalanced every trading day from the
  current covariance estimate, optionally scaling with the realized
  volatility of the unconstrained-portfolio return stream instead of the
  ex-ante model risk;
* the dynamically diluted 90/10 mix: a fixed relative split (90% industry,
  10% crypto by default) scaled by cash dilution toward a target
  volatility, with the volatility of the fully-invested mix estimated by a
  short EWMA or a daily-refit GARCH(1,1).

The backtest engine calls ``step`` once per trading date with that day's
realized returns (and covariance, where needed); the step returns target
weights formed from information through that date, or None to hold cash.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cra import (
    ConstraintSet,
    PortfolioWeights,
    RiskAllocation,
    cra_portfolio,
    solve_risk_allocation,
    weights_from_ray,
)
from .errors import ConfigError, EstimatorError, ModelError, ParameterError
from .marketdata import CRYPTO, INDUSTRY, AssetMeta
from .riskmodels import (
    EwmaEstimator,
    GarchParams,
    ewma_update,
    fit_garch11,
    garch_forecast,
    garch_variance_path,
)

logger = logging.getLogger(__name__)

# Minimum observations before the short-EWMA dilution estimator trades.
EWMA_MIN_OBS = 30


def default_relative_weights(meta: Sequence[AssetMeta]) -> np.ndarray:
    """90% split equally across industries, 10% equally across crypto."""
    cats = [m.category for m in meta]
    n_ind = cats.count(INDUSTRY)
    n_cry = cats.count(CRYPTO)
    if n_ind == 0 or n_cry == 0:
        raise ParameterError(
            "default 90/10 weights need both industry and crypto assets; "
            "pass relative_weights explicitly"
        )
    return np.array(
        [0.9 / n_ind if c == INDUSTRY else 0.1 / n_cry for c in cats]
    )


def category_cap_row(meta: Sequence[AssetMeta], category: str) -> np.ndarray:
    """Indicator row for a combined weight cap on one asset category."""
    row = np.array([1.0 if m.category == category else 0.0 for m in meta])
    if not row.any():
        raise ParameterError(f"no assets of category {category!r} in the universe")
    return row


def build_constraints(
    meta: Sequence[AssetMeta],
    sigma_daily: float,
    category_caps: Optional[dict] = None,
    asset_caps: Optional[dict] = None,
) -> ConstraintSet:
    """Assemble the cap matrix from per-category and per-asset limits."""
    n = len(meta)
    rows, bounds = [], []
    for category, cap in sorted((category_caps or {}).items()):
        rows.append(category_cap_row(meta, category))
        bounds.append(float(cap))
    ids = [m.asset_id for m in meta]
    for aid, cap in sorted((asset_caps or {}).items()):
        if aid not in ids:
            raise ParameterError(f"asset cap for unknown asset {aid!r}")
        row = np.zeros(n)
        row[ids.index(aid)] = 1.0
        rows.append(row)
        bounds.append(float(cap))
    if rows:
        return ConstraintSet(sigma_daily=sigma_daily, F=np.vstack(rows), g=np.array(bounds))
    return ConstraintSet.risk_only(sigma_daily, n)


@dataclass(frozen=True)
class VolEstimatorSpec:
    """Which estimator drives the 90/10 cash dilution."""

    kind: str = "ewma"  # "ewma" | "garch"
    half_life: float = 10.0
    window: int = 250
    refit_every: int = 1

    def __post_init__(self):
        if self.kind not in ("ewma", "garch"):
            raise ParameterError(f"vol estimator kind must be ewma or garch, got {self.kind!r}")
        if self.kind == "ewma" and not (self.half_life > 0.0):
            raise ParameterError("ewma half_life must be > 0")
        if self.kind == "garch" and self.window < 50:
            raise ParameterError("garch window must be >= 50")
        if self.kind == "garch" and self.refit_every < 1:
            raise ParameterError("refit_every must be >= 1")


@dataclass(frozen=True)
class StrategyConfig:
    """Configuration for one strategy run; only the selected kind's fields apply."""

    kind: str  # "cra" | "dd9010"
    universe: tuple[str, ...]
    constraints: ConstraintSet
    rho: Optional[RiskAllocation] = None
    relative_weights: Optional[np.ndarray] = None
    vol_estimator: VolEstimatorSpec = field(default_factory=VolEstimatorSpec)
    use_variation: bool = True
    variation_half_life: float = 10.0
    solver_tol: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("cra", "dd9010"):
            raise ConfigError(f"strategy kind must be cra or dd9010, got {self.kind!r}")
        if not self.universe:
            raise ConfigError("universe must not be empty")
        n = len(self.universe)
        if self.kind == "cra":
            if self.rho is None:
                raise ConfigError("cra strategy requires rho")
            if self.relative_weights is not None:
                raise ConfigError("relative_weights is a dd9010 field")
            if len(self.rho) != n:
                raise ConfigError(f"rho has {len(self.rho)} entries for {n} assets")
        else:
            if self.relative_weights is None:
                raise ConfigError("dd9010 strategy requires relative_weights")
            if self.rho is not None:
                raise ConfigError("rho is a cra field")
            rel = np.asarray(self.relative_weights, dtype=float)
            object.__setattr__(self, "relative_weights", rel)
            if rel.shape != (n,):
                raise ConfigError(f"relative_weights must have {n} entries")
            if (rel < 0.0).any() or abs(rel.sum() - 1.0) > 1e-12:
                raise ConfigError("relative_weights must be nonnegative and sum to 1")


def cra_strategy_step(
    sigma_t: np.ndarray,
    rho: RiskAllocation,
    constraints: ConstraintSet,
    realized_vol_of_xstar: Optional[float] = None,
) -> PortfolioWeights:
    """One CRA rebalance from the current covariance estimate.

    When ``realized_vol_of_xstar`` is given it replaces the ex-ante model
    risk in the scaling step.
    """
    return cra_portfolio(sigma_t, rho, constraints, risk_override=realized_vol_of_xstar)


def dd9010_step(
    relative_weights: np.ndarray,
    vol_estimate: float,
    constraints: ConstraintSet,
) -> PortfolioWeights:
    """Dilute a fixed relative mix with cash toward the target volatility.

    The exposure is ``e = min(1, sigma/vol, g_i/(F rel)_i)`` and the result
    holds ``e * relative_weights`` plus ``1 - e`` cash.
    """
    rel = np.asarray(relative_weights, dtype=float)
    if rel.ndim != 1 or (rel < 0.0).any() or abs(rel.sum() - 1.0) > 1e-12:
        raise ParameterError("relative_weights must be nonnegative and sum to 1")
    if not (vol_estimate > 0.0) or not math.isfinite(vol_estimate):
        raise EstimatorError(f"volatility estimate must be > 0, got {vol_estimate!r}")
    candidates = [1.0, constraints.sigma_daily / vol_estimate]
    if constraints.n_rows:
        frel = constraints.F @ rel
        bound = frel > 0.0
        candidates.extend(constraints.g[bound] / frel[bound])
    exposure = float(min(candidates))
    return PortfolioWeights(w=exposure * rel, c=1.0 - exposure)


class CraStrategy:
    """Stateful CRA: folds the realized-vol stream of the unconstrained portfolio.

    Each day the ray direction is re-solved from the covariance estimate;
    its realized return feeds a short EWMA whose volatility replaces the
    ex-ante risk in the scaling (the default "variation"). Days on which the
    covariance is still rank-deficient (first few observations) produce no
    weights and no stream update.
    """

    needs_covariance = True

    def __init__(
        self,
        rho: RiskAllocation,
        constraints: ConstraintSet,
        use_variation: bool = True,
        variation_half_life: float = 10.0,
        solver_tol: float = 1e-10,
    ):
        self.rho = rho
        self.constraints = constraints
        self.use_variation = use_variation
        self.solver_tol = solver_tol
        self._stream = EwmaEstimator(half_life=variation_half_life)

    def step(self, date, returns_row: np.ndarray, sigma: Optional[np.ndarray]) -> Optional[PortfolioWeights]:
        if sigma is None:
            raise ConfigError("CRA strategy requires a covariance series")
        try:
            x_star = solve_risk_allocation(sigma, self.rho, tol=self.solver_tol)
        except ModelError:
            logger.debug("covariance singular on %s; holding cash", date)
            return None
        risk_override = None
        if self.use_variation:
            self._stream = ewma_update(self._stream, float(x_star @ returns_row))
            vol = self._stream.volatility()
            if vol <= 0.0:
                raise EstimatorError("realized-volatility stream degenerated to zero")
            risk_override = vol
        return weights_from_ray(x_star, sigma, self.constraints, risk_override)


class DD9010Strategy:
    """Stateful diluted-mix strategy.

    The estimator consumes the return stream of the fully-invested mix (not
    the diluted portfolio). Until the estimator is ready (30 observations
    for the EWMA, a full window for GARCH) the strategy holds all cash.
    """

    needs_covariance = False

    def __init__(
        self,
        relative_weights: np.ndarray,
        constraints: ConstraintSet,
        estimator: VolEstimatorSpec = VolEstimatorSpec(),
    ):
        self.relative_weights = np.asarray(relative_weights, dtype=float)
        self.constraints = constraints
        self.spec = estimator
        self._ewma = EwmaEstimator(half_life=estimator.half_life)
        self._window: deque = deque(maxlen=estimator.window)
        self._params: Optional[GarchParams] = None
        self._next_var: Optional[float] = None
        self._since_refit = 0

    def step(self, date, returns_row: np.ndarray, sigma=None) -> Optional[PortfolioWeights]:
        mix_return = float(self.relative_weights @ returns_row)
        if self.spec.kind == "ewma":
            self._ewma = ewma_update(self._ewma, mix_return)
            if self._ewma.count < EWMA_MIN_OBS:
                return None
            vol = self._ewma.volatility()
        else:
            vol = self._garch_vol(mix_return)
            if vol is None:
                return None
        return dd9010_step(self.relative_weights, vol, self.constraints)

    def _garch_vol(self, mix_return: float) -> Optional[float]:
        self._window.append(mix_return)
        if len(self._window) < self.spec.window:
            return None
        if self._params is None or self._since_refit >= self.spec.refit_every:
            window = np.asarray(self._window)
            self._params = fit_garch11(window)
            path = garch_variance_path(window, self._params)
            eps_sq = (window[-1] - self._params.mu) ** 2
            self._next_var = garch_forecast(self._params, eps_sq, path[-1])
            self._since_refit = 0
        else:
            # roll the recursion forward under the last fitted parameters
            eps_sq = (mix_return - self._params.mu) ** 2
            self._next_var = garch_forecast(self._params, eps_sq, self._next_var)
        self._since_refit += 1
        return math.sqrt(self._next_var)


def build_strategy(config: StrategyConfig):
    """Instantiate a stateful strategy from its configuration."""
    if config.kind == "cra":
        return CraStrategy(
            rho=config.rho,
            constraints=config.constraints,
            use_variation=config.use_variation,
            variation_half_life=config.variation_half_life,
            solver_tol=config.solver_tol,
        )
    return DD9010Strategy(
        relative_weights=config.relative_weights,
        constraints=config.constraints,
        estimator=config.vol_estimator,
    )
