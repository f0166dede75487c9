"""Exact Shapley attribution of backtest metrics across asset categories.

A coalition game is built by backtesting the strategy restricted to every
subset of players (a player is one industry, or crypto as a whole); the
Shapley value of a player is its average marginal contribution over all
join orders. The empty coalition is the all-cash portfolio: zero return,
zero volatility, Sharpe 0 by convention, zero drawdown.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from .backtest import BacktestConfig, run_backtest
from .cra import RiskAllocation
from .errors import ParameterError, RiskallocError
from .marketdata import CRYPTO, INDUSTRY, AssetMeta, ReturnPanel
from .riskmodels import iewma_covariance
from .strategies import StrategyConfig, build_constraints

logger = logging.getLogger(__name__)

METRIC_KEYS = ("return_pct", "volatility_pct", "sharpe", "max_drawdown_pct")
MAX_PLAYERS = 16


@dataclass(frozen=True)
class Player:
    name: str
    assets: tuple[str, ...]

    def __post_init__(self):
        if not self.assets:
            raise ParameterError(f"player {self.name!r} has no assets")


def default_players(meta: Sequence[AssetMeta]) -> tuple[Player, ...]:
    """One player per industry asset, plus crypto as a whole."""
    players = [
        Player(m.display_name, (m.asset_id,)) for m in meta if m.category == INDUSTRY
    ]
    crypto = tuple(m.asset_id for m in meta if m.category == CRYPTO)
    if crypto:
        players.append(Player("Crypto", crypto))
    if not players:
        raise ParameterError("no assets to form players from")
    return tuple(players)


@dataclass(frozen=True)
class CoalitionValueTable:
    """Metric vector v(S) for every subset S of players, keyed by bitmask."""

    players: tuple[Player, ...]
    values: dict  # bitmask -> np.ndarray over METRIC_KEYS

    @property
    def n(self) -> int:
        return len(self.players)

    def is_complete(self) -> bool:
        return set(self.values) == set(range(2 ** self.n))

    def subset_assets(self, mask: int) -> tuple[str, ...]:
        assets: list[str] = []
        for i, player in enumerate(self.players):
            if mask >> i & 1:
                assets.extend(player.assets)
        return tuple(assets)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for mask in sorted(self.values):
            names = [p.name for i, p in enumerate(self.players) if mask >> i & 1]
            rows.append(
                {"coalition": "+".join(names) if names else "(cash)"}
                | dict(zip(METRIC_KEYS, self.values[mask]))
            )
        return pd.DataFrame(rows).set_index("coalition")


def enumerate_coalition_values(
    players: Sequence[Player],
    runner: Callable[[tuple[str, ...]], Sequence[float]],
    jobs: int = 1,
) -> CoalitionValueTable:
    """Run one backtest per player subset.

    ``runner`` maps a tuple of asset ids to a metric vector over
    ``METRIC_KEYS`` and must be deterministic. Runs are independent; with
    ``jobs > 1`` they execute in a process pool.
    """
    players = tuple(players)
    n = len(players)
    if n == 0 or n > MAX_PLAYERS:
        raise ParameterError(f"need between 1 and {MAX_PLAYERS} players, got {n}")
    seen: set[str] = set()
    for p in players:
        overlap = seen & set(p.assets)
        if overlap:
            raise ParameterError(f"players are not disjoint: {sorted(overlap)}")
        seen |= set(p.assets)

    table = CoalitionValueTable(players=players, values={0: np.zeros(len(METRIC_KEYS))})
    masks = list(range(1, 2 ** n))
    call = _RunnerCall(runner)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(call, [table.subset_assets(m) for m in masks]))
    else:
        raw = [call(table.subset_assets(m)) for m in masks]

    for mask, (vec, err) in zip(masks, raw):
        names = ", ".join(p.name for i, p in enumerate(players) if mask >> i & 1)
        if err is not None:
            raise RiskallocError(f"coalition backtest failed for {{{names}}}: {err}")
        if vec.shape != (len(METRIC_KEYS),):
            raise RiskallocError(
                f"coalition {{{names}}} returned shape {vec.shape}, "
                f"expected {len(METRIC_KEYS)} metrics"
            )
        table.values[mask] = vec
    return table


class _RunnerCall:
    """Picklable wrapper so coalition runs can cross process boundaries."""

    def __init__(self, runner):
        self.runner = runner

    def __call__(self, assets):
        try:
            return np.asarray(self.runner(assets), dtype=float), None
        except Exception as exc:  # noqa: BLE001 - reported by the parent
            return None, f"{type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class ShapleyReport:
    players: tuple[Player, ...]
    phi: np.ndarray  # (n_players, n_metrics)
    table: CoalitionValueTable

    @property
    def totals(self) -> np.ndarray:
        return self.phi.sum(axis=0)

    def to_frame(self) -> pd.DataFrame:
        """Metrics as rows, players as columns, plus a Total column."""
        frame = pd.DataFrame(
            self.phi.T,
            index=list(METRIC_KEYS),
            columns=[p.name for p in self.players],
        )
        frame["Total"] = self.totals
        return frame


def shapley_values(table: CoalitionValueTable) -> ShapleyReport:
    """Exact Shapley values: phi_i = sum over S not containing i of
    |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)), per metric."""
    if not table.is_complete():
        raise ParameterError(
            f"coalition table has {len(table.values)} of {2 ** table.n} subsets"
        )
    n = table.n
    fact = [math.factorial(k) for k in range(n + 1)]
    weights = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    sizes = [bin(mask).count("1") for mask in range(2 ** n)]

    phi = np.zeros((n, len(METRIC_KEYS)))
    for i in range(n):
        bit = 1 << i
        for mask in range(2 ** n):
            if mask & bit:
                continue
            gain = table.values[mask | bit] - table.values[mask]
            phi[i] += weights[sizes[mask]] * gain
    return ShapleyReport(players=table.players, phi=phi, table=table)


class CoalitionBacktestRunner:
    """Maps an asset subset to CRA backtest metrics on the restricted universe.

    The covariance is re-estimated on the restricted panel (for the iterated
    EWMA this equals slicing the full-universe estimate), the risk
    allocation is parity within the coalition, and the crypto cap applies
    only when the subset contains crypto assets. A NaN Sharpe (zero-vol
    coalition) maps to 0, extending the all-cash convention.
    """

    def __init__(
        self,
        panel: ReturnPanel,
        sigma_daily: float,
        crypto_cap: Optional[float],
        burn_in: int,
        annualization_days: int = 250,
        vol_half_life: float = 63.0,
        corr_half_life: float = 125.0,
        use_variation: bool = True,
        variation_half_life: float = 10.0,
        start=None,
        end=None,
    ):
        self.panel = panel
        self.sigma_daily = sigma_daily
        self.crypto_cap = crypto_cap
        self.burn_in = burn_in
        self.annualization_days = annualization_days
        self.vol_half_life = vol_half_life
        self.corr_half_life = corr_half_life
        self.use_variation = use_variation
        self.variation_half_life = variation_half_life
        self.start = start
        self.end = end

    def __call__(self, asset_ids: tuple[str, ...]) -> np.ndarray:
        sub = self.panel.select(asset_ids)
        # estimate on the full history, then let the engine cut the window,
        # matching the standalone backtest command
        cov = iewma_covariance(sub, self.vol_half_life, self.corr_half_life)
        caps = {}
        if self.crypto_cap is not None and any(
            m.category == CRYPTO for m in sub.meta
        ):
            caps[CRYPTO] = self.crypto_cap
        config = BacktestConfig(
            burn_in=self.burn_in,
            annualization_days=self.annualization_days,
            start=self.start,
            end=self.end,
            strategy=StrategyConfig(
                kind="cra",
                universe=sub.asset_ids,
                constraints=build_constraints(sub.meta, self.sigma_daily, caps),
                rho=RiskAllocation.parity(len(sub.asset_ids)),
                use_variation=self.use_variation,
                variation_half_life=self.variation_half_life,
            ),
        )
        result = run_backtest(sub, cov, config)
        summary = result.summary
        vec = np.array([summary[k] for k in METRIC_KEYS])
        if math.isnan(vec[2]):
            vec[2] = 0.0
        return vec


def write_shapley_csv(report: ShapleyReport, path) -> None:
    """Attribution table: metrics as rows, players as columns, plus Total."""
    from .backtest import format_cell

    frame = report.to_frame()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", *frame.columns])
        for metric, row in frame.iterrows():
            writer.writerow([metric] + [format_cell(v) for v in row])


def write_coalitions_csv(table: CoalitionValueTable, path) -> None:
    from .backtest import format_cell

    frame = table.to_frame()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coalition", *METRIC_KEYS])
        for coalition, row in frame.iterrows():
            writer.writerow([coalition] + [format_cell(v) for v in row])
