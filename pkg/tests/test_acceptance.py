"""Acceptance suite.

Criteria 1-4 reproduce the reference historical results and need the
real six-asset dataset, which is not redistributable: point
RISKALLOC_HISTORICAL_DATA at a directory containing prices.csv and
assets.csv in the documented schema (see data/README.md) to run them; they
skip otherwise. Criteria 5-11
run offline on synthetic data.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.
"""

import itertools
import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import random_pd_matrix, random_rho
from riskalloc.attribution import (
    CoalitionBacktestRunner,
    CoalitionValueTable,
    METRIC_KEYS,
    Player,
    default_players,
    enumerate_coalition_values,
    shapley_values,
)
from riskalloc.backtest import BacktestConfig, max_drawdown, run_backtest
from riskalloc.cra import ConstraintSet, RiskAllocation, cra_portfolio, solve_risk_allocation
from riskalloc.marketdata import (
    CRYPTO,
    INDUSTRY,
    ReturnPanel,
    align_and_compute_returns,
    load_asset_meta,
    load_price_csv,
    synthetic_panel,
    trading_calendar,
)
from riskalloc.riskmodels import (
    GarchParams,
    _gaussian_loglik,
    fit_garch11,
    iewma_covariance,
    simulate_garch11,
)
from riskalloc.strategies import (
    StrategyConfig,
    VolEstimatorSpec,
    build_constraints,
    default_relative_weights,
)

HISTORICAL_DATA_ENV = "RISKALLOC_HISTORICAL_DATA"
ANNUAL_DAYS = 250
SIGMA_DAILY = 0.10 / math.sqrt(ANNUAL_DAYS)
HISTORICAL_BURN_IN = 250


@contextmanager
def criterion(num, description):
    try:
        yield
    except pytest.skip.Exception:
        print(f"SKIP criterion {num}: {description}")
        raise
    except Exception:
        print(f"FAIL criterion {num}: {description}")
        raise
    print(f"PASS criterion {num}: {description}")


# ---------------------------------------------------------------------------
# Historical dataset plumbing (criteria 1-4)
# ---------------------------------------------------------------------------


def historical_data_dir():
    path = os.environ.get(HISTORICAL_DATA_ENV, "")
    if not path:
        pytest.skip(f"historical dataset not supplied; set {HISTORICAL_DATA_ENV} to run")
    path = Path(path)
    if not (path / "prices.csv").exists() or not (path / "assets.csv").exists():
        pytest.skip(f"{path} does not contain prices.csv and assets.csv")
    return path


@pytest.fixture(scope="module")
def historical_panel():
    path = historical_data_dir()
    meta = load_asset_meta(path / "assets.csv")
    prices = load_price_csv(path / "prices.csv", meta)
    calendar = trading_calendar(prices)
    assert len(calendar) == 1729, f"expected 1729 trading dates, got {len(calendar)}"
    return align_and_compute_returns(prices, calendar)


def reference_cra_run(panel, universe, crypto_cap):
    sub = panel.select(universe)
    caps = {CRYPTO: crypto_cap} if any(m.category == CRYPTO for m in sub.meta) else {}
    cov = iewma_covariance(sub, 63.0, 125.0)
    cfg = BacktestConfig(
        burn_in=HISTORICAL_BURN_IN,
        annualization_days=ANNUAL_DAYS,
        strategy=StrategyConfig(
            kind="cra",
            universe=sub.asset_ids,
            constraints=build_constraints(sub.meta, SIGMA_DAILY, caps),
            rho=RiskAllocation.parity(len(sub.asset_ids)),
        ),
    )
    return run_backtest(sub, cov, cfg)


def reference_dd_run(panel, estimator):
    cfg = BacktestConfig(
        burn_in=HISTORICAL_BURN_IN,
        annualization_days=ANNUAL_DAYS,
        strategy=StrategyConfig(
            kind="dd9010",
            universe=panel.asset_ids,
            constraints=build_constraints(panel.meta, SIGMA_DAILY, {CRYPTO: 0.10}),
            relative_weights=default_relative_weights(panel.meta),
            vol_estimator=estimator,
        ),
    )
    return run_backtest(panel, None, cfg)


class TestReferenceResults:
    def test_criterion_1_combined_cra(self, historical_panel):
        with criterion(1, "combined CRA matches the reference summary"):
            start = time.perf_counter()
            res = reference_cra_run(historical_panel, list(historical_panel.asset_ids), 0.10)
            elapsed = time.perf_counter() - start
            s = res.summary
            assert abs(s["return_pct"] - 8.2) <= 1.5, s
            assert abs(s["volatility_pct"] - 8.2) <= 1.0, s
            assert abs(s["sharpe"] - 1.00) <= 0.15, s
            assert abs(s["max_drawdown_pct"] - 19.6) <= 3.0, s
            assert abs(s["avg_cash_pct"] - 33.0) <= 5.0, s
            assert elapsed < 5.0, f"combined CRA took {elapsed:.2f}s"

    def test_criterion_2_single_class_portfolios(self, historical_panel):
        with criterion(2, "industries-only and crypto-only CRA summaries"):
            industries = [m.asset_id for m in historical_panel.meta if m.category == INDUSTRY]
            crypto = [m.asset_id for m in historical_panel.meta if m.category == CRYPTO]
            ind = reference_cra_run(historical_panel, industries, 0.10).summary
            cry = reference_cra_run(historical_panel, crypto, 0.10).summary
            assert abs(ind["sharpe"] - 0.73) <= 0.15, ind
            assert abs(cry["sharpe"] - 0.75) <= 0.15, cry
            assert abs(ind["avg_cash_pct"] - 25.0) <= 5.0, ind
            assert abs(cry["avg_cash_pct"] - 90.0) <= 3.0, cry

    def test_criterion_3_dd9010(self, historical_panel):
        with criterion(3, "DD90/10 EWMA and GARCH variants"):
            start = time.perf_counter()
            ewma = reference_dd_run(historical_panel, VolEstimatorSpec(kind="ewma", half_life=10.0)).summary
            garch = reference_dd_run(
                historical_panel, VolEstimatorSpec(kind="garch", window=250, refit_every=1)
            ).summary
            elapsed = time.perf_counter() - start
            assert abs(ewma["sharpe"] - 1.06) <= 0.15, ewma
            assert abs(ewma["volatility_pct"] - 9.8) <= 1.0, ewma
            assert abs(garch["sharpe"] - 1.04) <= 0.15, garch
            assert elapsed < 120.0, f"DD90/10 runs took {elapsed:.1f}s"

    def test_criterion_4_shapley(self, historical_panel):
        with criterion(4, "Shapley attribution over the five categories"):
            start = time.perf_counter()
            runner = CoalitionBacktestRunner(
                panel=historical_panel,
                sigma_daily=SIGMA_DAILY,
                crypto_cap=0.10,
                burn_in=HISTORICAL_BURN_IN,
                annualization_days=ANNUAL_DAYS,
            )
            players = default_players(historical_panel.meta)
            assert len(players) == 5
            table = enumerate_coalition_values(players, runner)
            report = shapley_values(table)
            elapsed = time.perf_counter() - start

            combined = reference_cra_run(historical_panel, list(historical_panel.asset_ids), 0.10).summary
            expected = np.array([combined[k] for k in METRIC_KEYS])
            np.testing.assert_allclose(report.totals, expected, atol=1e-10)

            names = [p.name for p in players]
            crypto_idx = names.index("Crypto")
            ret_row = report.phi[:, METRIC_KEYS.index("return_pct")]
            dd_row = report.phi[:, METRIC_KEYS.index("max_drawdown_pct")]
            assert abs(ret_row[crypto_idx] - 2.5) <= 0.8, ret_row
            assert dd_row.argmax() == crypto_idx, dd_row
            assert elapsed < 180.0, f"32 coalition runs took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# Offline criteria (5-11)
# ---------------------------------------------------------------------------


def mixed_test_panel():
    return synthetic_panel(
        6,
        400,
        [0.012, 0.011, 0.013, 0.010, 0.045, 0.055],
        0.25,
        seed=3,
        asset_ids=["IndA", "IndB", "IndC", "IndD", "CoinA", "CoinB"],
        categories=[INDUSTRY] * 4 + [CRYPTO] * 2,
    )


class TestOffline:
    def test_criterion_5_solver_first_order(self):
        with criterion(5, "solver first-order conditions on 1000 random instances"):
            rng = np.random.default_rng(2024)
            for _ in range(1000):
                n = int(rng.integers(2, 9))
                sigma = random_pd_matrix(rng, n)
                rho = random_rho(rng, n)
                x = solve_risk_allocation(sigma, rho)
                sx = sigma @ x
                assert np.abs(x * sx - rho).max() <= 1e-8
                assert abs(x @ sx - 1.0) <= 1e-8
            for _ in range(50):
                n = int(rng.integers(2, 9))
                diag = rng.uniform(0.01, 4.0, n)
                rho = random_rho(rng, n)
                x = solve_risk_allocation(np.diag(diag), rho)
                assert np.abs(x - np.sqrt(rho) / np.sqrt(diag)).max() <= 1e-10

    def test_criterion_6_scaling_feasible_and_tight(self):
        with criterion(6, "CRA weights feasible with one tight scaling candidate"):
            rng = np.random.default_rng(2025)
            for _ in range(1000):
                n = int(rng.integers(2, 9))
                sigma = random_pd_matrix(rng, n)
                rho = random_rho(rng, n)
                m = int(rng.integers(1, 4))
                cons = ConstraintSet(
                    sigma_daily=float(rng.uniform(0.02, 2.0)),
                    F=rng.uniform(0.0, 1.0, (m, n)) + 1e-3,
                    g=rng.uniform(0.02, 0.8, m),
                )
                pw = cra_portfolio(sigma, rho, cons)
                # every constraint of the risk allocation problem
                assert (pw.w >= 0.0).all() and pw.c >= 0.0
                assert abs(pw.w.sum() + pw.c - 1.0) <= 1e-10
                port_var = pw.w @ sigma @ pw.w
                contrib = pw.w * (sigma @ pw.w)
                assert np.abs(contrib - np.asarray(rho) * port_var).max() <= 1e-8
                assert math.sqrt(port_var) <= cons.sigma_daily * (1 + 1e-10)
                assert (cons.F @ pw.w <= cons.g * (1 + 1e-10)).all()
                slacks = np.concatenate(
                    [
                        [1.0 - pw.exposure, 1.0 - math.sqrt(port_var) / cons.sigma_daily],
                        1.0 - (cons.F @ pw.w) / cons.g,
                    ]
                )
                assert slacks.min() <= 1e-10

    def test_criterion_7_drawdown_brute_force(self):
        with criterion(7, "O(T) drawdown equals the O(T^2) double loop"):
            rng = np.random.default_rng(2026)
            for _ in range(200):
                T = int(rng.integers(2, 501))
                values = np.cumprod(1.0 + rng.normal(0.0, 0.02, T))
                fast = max_drawdown(values)
                slow = 0.0
                for i in range(T):
                    for j in range(i + 1, T):
                        slow = max(slow, 1.0 - values[j] / values[i])
                assert fast == 100.0 * slow

    def test_criterion_8_shapley_axioms(self):
        with criterion(8, "Shapley efficiency, dummy, and symmetry axioms"):
            rng = np.random.default_rng(2027)
            for n in range(2, 7):
                players = tuple(Player(f"P{i}", (f"x{i}",)) for i in range(n))
                lookup = {
                    frozenset(s): float(rng.normal())
                    for k in range(1, n + 1)
                    for s in itertools.combinations(range(n), k)
                }
                lookup[frozenset()] = 0.0
                values = {
                    mask: np.full(
                        len(METRIC_KEYS),
                        lookup[frozenset(i for i in range(n) if mask >> i & 1)],
                    )
                    for mask in range(2**n)
                }
                report = shapley_values(CoalitionValueTable(players=players, values=values))
                grand = values[2**n - 1]
                assert np.abs(report.totals - grand).max() <= 1e-10

                # dummy: player n-1 contributes nothing
                dummy_lookup = {
                    s: float(rng.normal()) for s in map(frozenset, _subsets(n - 1))
                }
                dummy_lookup[frozenset()] = 0.0
                values = {
                    mask: np.full(
                        len(METRIC_KEYS),
                        dummy_lookup[frozenset(i for i in range(n - 1) if mask >> i & 1)],
                    )
                    for mask in range(2**n)
                }
                report = shapley_values(CoalitionValueTable(players=players, values=values))
                assert (report.phi[n - 1] == 0.0).all()

                # symmetry: players 0 and 1 interchangeable
                def sym_value(members):
                    return 2.0 * len(members & {0, 1}) + 0.7 * len(members - {0, 1})

                values = {
                    mask: np.full(
                        len(METRIC_KEYS),
                        sym_value({i for i in range(n) if mask >> i & 1}),
                    )
                    for mask in range(2**n)
                }
                report = shapley_values(CoalitionValueTable(players=players, values=values))
                assert np.abs(report.phi[0] - report.phi[1]).max() <= 1e-12

    def test_criterion_9_no_lookahead(self):
        with criterion(9, "tail perturbation leaves earlier weights bit-identical"):
            panel = mixed_test_panel()
            cov = iewma_covariance(panel, 10, 20)
            cfg = BacktestConfig(
                burn_in=60,
                strategy=StrategyConfig(
                    kind="cra",
                    universe=panel.asset_ids,
                    constraints=build_constraints(panel.meta, SIGMA_DAILY, {CRYPTO: 0.10}),
                    rho=RiskAllocation.parity(6),
                ),
            )
            base = run_backtest(panel, cov, cfg)

            cut = 300
            frame = panel.frame.copy()
            frame.iloc[cut:] = frame.iloc[cut:].to_numpy() * 2.0 + 0.005
            perturbed_panel = ReturnPanel(frame=frame, meta=panel.meta)
            perturbed = run_backtest(
                perturbed_panel, iewma_covariance(perturbed_panel, 10, 20), cfg
            )
            keep = base.decision_dates < panel.dates[cut]
            assert keep.sum() > 200
            assert np.array_equal(base.weights[keep], perturbed.weights[keep])
            assert np.array_equal(base.cash[keep], perturbed.cash[keep])

    def test_criterion_10_garch_recovery(self):
        with criterion(10, "GARCH(1,1) parameter recovery on 50 synthetic series"):
            truth = GarchParams(omega=1e-6, a1=0.1, b1=0.85, mu=0.0)
            persistence = []
            for seed in range(50):
                window = simulate_garch11(truth, 250, seed=seed)
                fit = fit_garch11(window)
                mu = float(np.mean(window))
                eps2 = (window - mu) ** 2
                var0 = float(np.mean(eps2))
                ll_fallback = _gaussian_loglik(eps2, var0, 0.0, 0.0, var0)
                assert fit.loglik >= ll_fallback, f"seed {seed}"
                persistence.append(fit.a1 + fit.b1)
            med = float(np.median(persistence))
            assert 0.6 < med < 1.0, f"median persistence {med}"

    def test_criterion_11_iewma_validity(self):
        with criterion(11, "IEWMA correlations valid and covariance reconstructs"):
            panel = mixed_test_panel()
            cov = iewma_covariance(panel, 10, 20)
            for t in range(len(cov)):
                corr = cov.corrs[t]
                assert (np.diag(corr) == 1.0).all()
                off = corr[~np.eye(len(corr), dtype=bool)]
                assert (np.abs(off) <= 1.0 + 1e-12).all()
                rebuilt = np.outer(cov.vols[t], cov.vols[t]) * corr
                assert np.abs(cov.sigmas[t] - rebuilt).max() <= 1e-12


def _subsets(n):
    for k in range(n + 1):
        yield from itertools.combinations(range(n), k)
