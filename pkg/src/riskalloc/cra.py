"""Constrained risk allocation.

The problem: choose nonnegative asset weights ``w`` and cash ``c`` with
``1'w + c = 1`` to minimize cash, subject to prescribed risk-contribution
fractions ``w_i (Sigma w)_i = rho_i w' Sigma w``, a total volatility cap,
and linear weight caps ``F w <= g``.

Every weight vector satisfying the risk-contribution equalities lies on the
ray ``alpha * x_star`` where ``x_star`` is the unique minimizer of

    (1/2) x' Sigma x - sum_i rho_i log(x_i)      over x > 0,

so the solution factors into a small convex solve (damped Newton) followed
by an analytic scaling: ``alpha_star`` is the smallest of the upper bounds
imposed by full investment, the risk cap, and each weight cap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConvergenceError, ModelError, ParameterError

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MIN_STEP = 1e-20


@dataclass(frozen=True)
class RiskAllocation:
    """Prescribed positive risk fractions summing to one."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 1 or len(rho) == 0:
            raise ParameterError("rho must be a non-empty vector")
        if not np.isfinite(rho).all() or (rho <= 0.0).any():
            raise ParameterError(
                "rho must be strictly positive; drop zero-allocation assets "
                "from the universe instead"
            )
        if abs(rho.sum() - 1.0) > 1e-12:
            raise ParameterError(f"rho must sum to 1, got {rho.sum()!r}")

    @classmethod
    def parity(cls, n: int) -> "RiskAllocation":
        """Equal risk fractions (risk parity)."""
        if n < 1:
            raise ParameterError("n must be >= 1")
        rho = np.full(n, 1.0 / n)
        rho[-1] = 1.0 - rho[:-1].sum()
        return cls(rho)

    def __len__(self) -> int:
        return len(self.rho)


@dataclass(frozen=True)
class ConstraintSet:
    """Volatility cap plus nonnegative linear weight caps ``F w <= g``."""

    sigma_daily: float
    F: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        if not (self.sigma_daily > 0.0):
            raise ParameterError(f"sigma_daily must be > 0, got {self.sigma_daily}")
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "g", g)
        if F.shape[0] != g.shape[0]:
            raise ParameterError(f"F has {F.shape[0]} rows but g has {g.shape[0]}")
        if F.size and ((F < 0.0).any() or not np.isfinite(F).all()):
            raise ParameterError("F must be elementwise nonnegative and finite")
        if F.shape[0] and (~(F > 0.0).any(axis=1)).any():
            raise ParameterError("every row of F must be nonzero")
        if g.size and (not np.isfinite(g).all() or (g <= 0.0).any()):
            raise ParameterError("g must be strictly positive and finite")

    @classmethod
    def risk_only(cls, sigma_daily: float, n_assets: int) -> "ConstraintSet":
        return cls(sigma_daily=sigma_daily, F=np.zeros((0, n_assets)), g=np.zeros(0))

    @property
    def n_rows(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class PortfolioWeights:
    """Nonnegative asset weights plus cash, summing to one."""

    w: np.ndarray
    c: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 1:
            raise ParameterError("w must be a vector")
        if not np.isfinite(w).all() or (w < 0.0).any():
            raise ParameterError("weights must be finite and nonnegative")
        if self.c < 0.0 or not math.isfinite(self.c):
            raise ParameterError(f"cash weight must be >= 0, got {self.c}")
        total = w.sum() + self.c
        if abs(total - 1.0) > 1e-10:
            raise ParameterError(f"weights plus cash must sum to 1, got {total!r}")

    @classmethod
    def all_cash(cls, n_assets: int) -> "PortfolioWeights":
        return cls(w=np.zeros(n_assets), c=1.0)

    @property
    def exposure(self) -> float:
        return float(self.w.sum())


def _as_rho(rho: Union[RiskAllocation, np.ndarray]) -> np.ndarray:
    if isinstance(rho, RiskAllocation):
        return rho.rho
    return RiskAllocation(np.asarray(rho, dtype=float)).rho


def solve_risk_allocation(
    sigma: np.ndarray,
    rho: Union[RiskAllocation, np.ndarray],
    tol: float = 1e-10,
    max_iter: int = 100,
) -> np.ndarray:
    """Minimize ``(1/2) x'Sigma x - sum_i rho_i log(x_i)`` over ``x > 0``.

    Damped Newton iteration: gradient ``Sigma x - rho/x``, Hessian
    ``Sigma + diag(rho/x**2)`` (positive definite for positive definite
    Sigma), with backtracking that rejects any step leaving the positive
    orthant. Converged when the stationarity residual satisfies
    ``||Sigma x - rho/x||_inf <= tol * max(1, ||Sigma x||_inf)``.

    At the solution ``x_i (Sigma x)_i = rho_i`` for every i, hence
    ``x' Sigma x = 1``.
    """
    rho = _as_rho(rho)
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] != len(rho):
        raise ParameterError(
            f"sigma must be {len(rho)}x{len(rho)}, got shape {S.shape}"
        )
    if not np.isfinite(S).all():
        raise ModelError("covariance contains non-finite entries")
    if not np.allclose(S, S.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(S).max())):
        raise ModelError("covariance must be symmetric")
    if not (tol > 0.0):
        raise ParameterError(f"tol must be > 0, got {tol}")
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ModelError("covariance is not positive definite") from exc

    # Normalize the variance scale: the solution is equivariant
    # (x*(k^2 Sigma) = x*(Sigma)/k), and unit scale keeps the Newton
    # iteration far from floating-point noise for daily-unit covariances.
    scale = float(np.mean(np.diag(S)))
    root = math.sqrt(scale)
    Sh = S / scale

    x = np.sqrt(rho) / np.sqrt(np.diag(Sh))

    def objective(v):
        return 0.5 * v @ Sh @ v - rho @ np.log(v)

    resid = np.inf
    for iteration in range(max_iter):
        Sx = Sh @ x
        grad = Sx - rho / x
        # convergence is judged on the original scale (both sides scale by root)
        resid = root * np.abs(grad).max()
        if resid <= tol * max(1.0, root * np.abs(Sx).max()):
            x = _polish(Sh, rho, x, tol)
            logger.debug(
                "risk allocation solve converged: n=%d iterations=%d residual=%.3e",
                len(rho), iteration, resid,
            )
            return x / root
        hess = Sh + np.diag(rho / (x * x))
        step = -cho_solve(cho_factor(hess), grad)

        t = 1.0
        while (x + t * step <= 0.0).any():
            t *= 0.5
            if t < _MIN_STEP:
                raise ConvergenceError("line search cannot stay in the positive orthant")
        fx = objective(x)
        decrement = -(grad @ step)
        # backtrack only while the predicted decrease is resolvable in floats
        if decrement > 1e-13 * max(1.0, abs(fx)):
            while objective(x + t * step) > fx - _ARMIJO * t * decrement:
                t *= 0.5
                if t < _MIN_STEP:
                    raise ConvergenceError("line search failed to decrease the objective")
        x = x + t * step

    raise ConvergenceError(
        f"risk allocation solve did not converge in {max_iter} iterations; "
        f"final residual {resid:.3e}"
    )


def _polish(Sh, rho, x, tol):
    # The stationarity rule can fire while ill-conditioned instances still
    # carry risk-contribution error near the tolerance (contributions are
    # gradient times x, and x spreads with the condition number). A few
    # extra full Newton steps are nearly free and quadratically shrink it.
    # Contributions x * (Sigma x) are invariant under the variance scaling.
    err = np.abs(x * (Sh @ x) - rho).max()
    for _ in range(3):
        if err <= tol:
            break
        grad = Sh @ x - rho / x
        step = -cho_solve(cho_factor(Sh + np.diag(rho / (x * x))), grad)
        candidate = x + step
        if (candidate <= 0.0).any():
            break
        candidate_err = np.abs(candidate * (Sh @ candidate) - rho).max()
        if candidate_err >= err:
            break
        x, err = candidate, candidate_err
    return x


def compute_scaling(
    x_star: np.ndarray,
    risk_of_xstar: float,
    constraints: ConstraintSet,
) -> float:
    """Largest feasible scale along the ray ``alpha * x_star``.

    ``alpha_star = min(1/1'x, sigma/risk, g_i/(F x)_i)``. A zero ``(F x)_i``
    puts no bound on alpha (slack constraint) and is excluded from the min.
    ``risk_of_xstar`` is the daily volatility of the x_star portfolio,
    either ex-ante ``sqrt(x'Sigma x)`` or a realized-volatility estimate of
    its return stream.
    """
    x = np.asarray(x_star, dtype=float)
    if x.ndim != 1 or not np.isfinite(x).all() or (x <= 0.0).any():
        raise ParameterError("x_star must be a finite positive vector")
    if not (risk_of_xstar > 0.0) or not math.isfinite(risk_of_xstar):
        raise ParameterError(f"risk_of_xstar must be > 0, got {risk_of_xstar}")
    candidates = [1.0 / x.sum(), constraints.sigma_daily / risk_of_xstar]
    if constraints.n_rows:
        if constraints.F.shape[1] != len(x):
            raise ParameterError(
                f"F has {constraints.F.shape[1]} columns but x_star has {len(x)}"
            )
        fx = constraints.F @ x
        bound = fx > 0.0
        candidates.extend(constraints.g[bound] / fx[bound])
    return float(min(candidates))


def weights_from_ray(
    x_star: np.ndarray,
    sigma: np.ndarray,
    constraints: ConstraintSet,
    risk_override: Optional[float] = None,
) -> PortfolioWeights:
    """Scale an already-solved ray direction into portfolio weights."""
    if risk_override is None:
        risk = math.sqrt(float(x_star @ sigma @ x_star))
    else:
        if not (risk_override > 0.0):
            raise ParameterError(f"risk_override must be > 0, got {risk_override}")
        risk = float(risk_override)
    alpha = compute_scaling(x_star, risk, constraints)
    w = alpha * np.asarray(x_star, dtype=float)
    c = 1.0 - w.sum()
    if -1e-12 < c < 0.0:  # clamp rounding noise when fully invested
        c = 0.0
    return PortfolioWeights(w=w, c=c)


def cra_portfolio(
    sigma: np.ndarray,
    rho: Union[RiskAllocation, np.ndarray],
    constraints: ConstraintSet,
    risk_override: Optional[float] = None,
    tol: float = 1e-10,
) -> PortfolioWeights:
    """Solve the constrained risk allocation problem.

    Two steps: solve for the ray direction ``x_star``, then scale it as
    large as every constraint allows. ``risk_override``, when given,
    replaces the ex-ante ``sqrt(x'Sigma x)`` in the risk-cap bound with a
    realized-volatility estimate of the x_star return stream.
    """
    x_star = solve_risk_allocation(sigma, rho, tol=tol)
    return weights_from_ray(x_star, sigma, constraints, risk_override)
