"""Volatility and covariance estimation.

Three estimators are provided:

* a half-life EWMA of squared observations with finite-sample weight
  normalization (the workhorse volatility estimate),
* the iterated EWMA covariance, which estimates per-asset volatilities and
  the correlation matrix with separate half-lives and recombines them as
  ``Sigma = V R V``,
* a Gaussian quasi-maximum-likelihood GARCH(1,1) fit with a one-step
  variance forecast.

Estimators are value types: updates return a new state.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import DegenerateSeriesError, EstimatorError, ParameterError
from .marketdata import ReturnPanel

logger = logging.getLogger(__name__)

# Weight mass accumulated after ~three half-lives; estimates below this are
# flagged immature and must not be used for trading.
MATURITY_THRESHOLD = 1.0 - 2.0 ** -3


def half_life_decay(half_life: float) -> float:
    """Decay factor beta = 2**(-1/half_life), in (0, 1)."""
    if not (half_life > 0.0) or not math.isfinite(half_life):
        raise ParameterError(f"half_life must be positive and finite, got {half_life}")
    return 2.0 ** (-1.0 / half_life)


@dataclass(frozen=True)
class EwmaEstimator:
    """Running EWMA of squared observations.

    The raw recursion ``state = beta*state + (1-beta)*obs**2`` starts from
    zero, so the estimate divides by the accumulated weight mass
    ``weight_sum``; after normalization the estimate is a convex combination
    of the observed squares.
    """

    half_life: float
    state: float = 0.0
    weight_sum: float = 0.0
    count: int = 0

    def __post_init__(self):
        half_life_decay(self.half_life)  # validates

    @property
    def beta(self) -> float:
        return half_life_decay(self.half_life)

    @property
    def mature(self) -> bool:
        return self.weight_sum > MATURITY_THRESHOLD

    def estimate(self) -> float:
        """Normalized second-moment estimate."""
        if self.count == 0:
            raise EstimatorError("EWMA estimator has no observations")
        return self.state / self.weight_sum

    def volatility(self) -> float:
        return math.sqrt(self.estimate())


def ewma_update(est: EwmaEstimator, observation: float) -> EwmaEstimator:
    """Fold one observation into the estimator, returning the new state."""
    if not math.isfinite(observation):
        raise ParameterError(f"observation must be finite, got {observation!r}")
    b = est.beta
    return replace(
        est,
        state=b * est.state + (1.0 - b) * observation * observation,
        weight_sum=b * est.weight_sum + (1.0 - b),
        count=est.count + 1,
    )


@dataclass(frozen=True)
class CovarianceSeries:
    """Per-trading-day covariance estimates ``Sigma_t = V_t R_t V_t``."""

    dates: pd.DatetimeIndex
    asset_ids: tuple[str, ...]
    vols: np.ndarray    # (T, n) volatility estimates V_t
    corrs: np.ndarray   # (T, n, n) correlation matrices R_t, unit diagonal
    sigmas: np.ndarray  # (T, n, n) covariances
    mature: np.ndarray  # (T,) bool, vol estimator past its warm-up mass

    def __len__(self) -> int:
        return len(self.dates)

    def slice_mask(self, mask: np.ndarray) -> "CovarianceSeries":
        return CovarianceSeries(
            dates=self.dates[mask],
            asset_ids=self.asset_ids,
            vols=self.vols[mask],
            corrs=self.corrs[mask],
            sigmas=self.sigmas[mask],
            mature=self.mature[mask],
        )


def iewma_covariance(
    panel: ReturnPanel,
    vol_half_life: float = 63.0,
    corr_half_life: float = 125.0,
) -> CovarianceSeries:
    """Iterated-EWMA covariance series over a return panel.

    Per date t: volatilities ``V_t`` come from per-asset EWMAs of squared
    returns, standardized returns ``z_t = r_t / V_t`` feed an EWMA of outer
    products whose diagonal is renormalized to one, and the covariance is
    reassembled as ``V_t R_t V_t``. Estimates at date t use returns up to
    and including date t.
    """
    bv = half_life_decay(vol_half_life)
    br = half_life_decay(corr_half_life)
    rets = panel.values
    T, n = rets.shape
    if T < 2:
        raise ParameterError("panel must contain at least two dates")

    vols = np.empty((T, n))
    corrs = np.empty((T, n, n))
    sigmas = np.empty((T, n, n))
    mature = np.empty(T, dtype=bool)

    var_state = np.zeros(n)
    var_mass = 0.0
    outer_state = np.zeros((n, n))
    outer_mass = 0.0
    for t in range(T):
        r = rets[t]
        var_state = bv * var_state + (1.0 - bv) * r * r
        var_mass = bv * var_mass + (1.0 - bv)
        var = var_state / var_mass
        if (var <= 0.0).any():
            j = int(np.argmax(var <= 0.0))
            raise DegenerateSeriesError(
                f"zero volatility estimate for asset {panel.asset_ids[j]!r} "
                f"on {panel.dates[t].date()}; cannot standardize"
            )
        v = np.sqrt(var)
        z = r / v
        outer_state = br * outer_state + (1.0 - br) * np.outer(z, z)
        outer_mass = br * outer_mass + (1.0 - br)
        raw = outer_state / outer_mass
        d = np.diag(raw).copy()
        corr = raw / np.sqrt(np.outer(d, d))
        np.fill_diagonal(corr, 1.0)
        vols[t] = v
        corrs[t] = corr
        sigmas[t] = np.outer(v, v) * corr
        mature[t] = var_mass > MATURITY_THRESHOLD

    return CovarianceSeries(
        dates=panel.dates,
        asset_ids=panel.asset_ids,
        vols=vols,
        corrs=corrs,
        sigmas=sigmas,
        mature=mature,
    )


def export_covariance_csv(cov: CovarianceSeries, directory) -> None:
    """Write one CSV matrix per date plus an index file (plot-ready data)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "index.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "file", "mature"])
        for t, day in enumerate(cov.dates):
            name = f"sigma_{day.date().isoformat()}.csv"
            writer.writerow([day.date().isoformat(), name, int(cov.mature[t])])
            with open(directory / name, "w", newline="", encoding="utf-8") as mf:
                mw = csv.writer(mf)
                mw.writerow(list(cov.asset_ids))
                for row in cov.sigmas[t]:
                    mw.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# GARCH(1,1)
# ---------------------------------------------------------------------------

_STATIONARITY_CAP = 1.0 - 1e-6


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) parameters with fit diagnostics.

    The conditional-variance recursion is
    ``sigma2_t = omega + a1*eps_{t-1}**2 + b1*sigma2_{t-1}`` with
    ``eps_t = r_t - mu``.
    """

    omega: float
    a1: float
    b1: float
    mu: float
    fallback: bool = False
    loglik: float = float("nan")

    def __post_init__(self):
        if self.omega < 0.0 or not math.isfinite(self.omega):
            raise ParameterError(f"omega must be >= 0, got {self.omega}")
        if self.a1 < 0.0 or self.b1 < 0.0:
            raise ParameterError("a1 and b1 must be >= 0")
        if self.a1 + self.b1 >= 1.0:
            raise ParameterError(
                f"a1 + b1 = {self.a1 + self.b1} violates covariance stationarity"
            )

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.a1 - self.b1)


def garch_variance_path(window: np.ndarray, params: GarchParams) -> np.ndarray:
    """Conditional variance path over a window, seeded at the sample variance."""
    w = np.asarray(window, dtype=float)
    eps2 = (w - params.mu) ** 2
    var0 = float(np.var(w))
    return _variance_path(eps2, params.omega, params.a1, params.b1, var0)


def _variance_path(eps2, omega, a1, b1, var0):
    T = len(eps2)
    sig2 = np.empty(T)
    sig2[0] = var0
    if T > 1:
        drive = omega + a1 * eps2[:-1]
        sig2[1:] = lfilter([1.0], [1.0, -b1], drive, zi=np.array([b1 * var0]))[0]
    return sig2


def _gaussian_loglik(eps2, omega, a1, b1, var0):
    sig2 = _variance_path(eps2, omega, a1, b1, var0)
    if not np.all(sig2 > 0.0) or not np.all(np.isfinite(sig2)):
        return -np.inf
    T = len(eps2)
    return -0.5 * (T * math.log(2.0 * math.pi) + np.sum(np.log(sig2) + eps2 / sig2))


def fit_garch11(window) -> GarchParams:
    """Fit GARCH(1,1) by Gaussian quasi-MLE on a return window.

    The mean is fixed at the window sample mean and (omega, a1, b1) are
    optimized over an unconstrained reparameterization (log variance scale,
    logistic persistence split) with Nelder-Mead. The returned likelihood is
    never below that of the start point or of the constant-variance fallback
    (a1 = b1 = 0, omega = sample variance); if the optimizer cannot beat the
    fallback, the fallback is returned with ``fallback=True``.
    """
    w = np.asarray(window, dtype=float)
    if w.ndim != 1 or len(w) < 50:
        raise ParameterError("GARCH window must be a vector with >= 50 returns")
    if not np.isfinite(w).all():
        raise ParameterError("GARCH window contains non-finite returns")
    mu = float(np.mean(w))
    eps2 = (w - mu) ** 2
    var0 = float(np.mean(eps2))
    if var0 <= 0.0 or w.max() == w.min():
        logger.warning("degenerate constant-return GARCH window; using fallback")
        return GarchParams(0.0, 0.0, 0.0, float(w[0]), fallback=True, loglik=float("-inf"))

    def unpack(theta):
        u, s_logit, p_logit = theta
        omega = var0 * math.exp(u)
        s = _STATIONARITY_CAP / (1.0 + math.exp(-s_logit))
        p = 1.0 / (1.0 + math.exp(-p_logit))
        return omega, s * p, s * (1.0 - p)

    def nll(theta):
        try:
            omega, a1, b1 = unpack(theta)
        except OverflowError:
            return np.inf
        return -_gaussian_loglik(eps2, omega, a1, b1, var0)

    # start at the customary persistent point a1=0.1, b1=0.85
    a_start, b_start = 0.10, 0.85
    s0 = a_start + b_start
    theta0 = np.array([
        math.log(1.0 - s0),
        math.log(s0 / (_STATIONARITY_CAP - s0)),
        math.log(a_start / b_start),
    ])

    ll_start = _gaussian_loglik(eps2, var0 * (1.0 - s0), a_start, b_start, var0)
    ll_fallback = _gaussian_loglik(eps2, var0, 0.0, 0.0, var0)
    best = (ll_start, (var0 * (1.0 - s0), a_start, b_start), False)
    if ll_fallback > best[0]:
        best = (ll_fallback, (var0, 0.0, 0.0), True)

    try:
        res = minimize(
            nll,
            theta0,
            method="Nelder-Mead",
            options={"maxiter": 2000, "xatol": 1e-6, "fatol": 1e-8},
        )
        ll_opt = -res.fun
        if math.isfinite(ll_opt) and ll_opt > best[0]:
            best = (ll_opt, unpack(res.x), False)
    except Exception:  # noqa: BLE001 - optimizer failure falls back, never aborts
        logger.warning("GARCH optimizer raised; keeping fallback parameters")

    ll, (omega, a1, b1), is_fallback = best
    if is_fallback:
        logger.debug("GARCH fit fell back to constant variance (ll=%.4f)", ll)
    return GarchParams(omega, a1, b1, mu, fallback=is_fallback, loglik=float(ll))


def garch_forecast(params: GarchParams, last_eps_sq: float, last_var: float) -> float:
    """One-step-ahead conditional variance."""
    if last_eps_sq < 0.0 or last_var < 0.0:
        raise ParameterError("last_eps_sq and last_var must be nonnegative")
    if not (math.isfinite(last_eps_sq) and math.isfinite(last_var)):
        raise ParameterError("last_eps_sq and last_var must be finite")
    return params.omega + params.a1 * last_eps_sq + params.b1 * last_var


def simulate_garch11(
    params: GarchParams,
    n_days: int,
    seed: int,
    burn: int = 250,
) -> np.ndarray:
    """Simulate a GARCH(1,1) return series (Gaussian innovations)."""
    if n_days < 1 or burn < 0:
        raise ParameterError("n_days must be >= 1 and burn >= 0")
    if params.omega <= 0.0:
        raise ParameterError("simulation requires omega > 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_days + burn)
    sig2 = params.unconditional_variance
    out = np.empty(n_days + burn)
    for t in range(n_days + burn):
        eps = math.sqrt(sig2) * z[t]
        out[t] = params.mu + eps
        sig2 = params.omega + params.a1 * eps * eps + params.b1 * sig2
    return out[burn:]
