"""Command-line front end.

Subcommands: ``backtest`` (one strategy run, writes summary/weights/values/
annual artifacts), ``attribute`` (Shapley attribution over all player
coalitions), and ``compare`` (side-by-side value paths and metrics for
several configs). Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import (
    CoalitionBacktestRunner,
    default_players,
    enumerate_coalition_values,
    shapley_values,
    write_coalitions_csv,
    write_shapley_csv,
)
from .backtest import (
    BacktestConfig,
    format_cell,
    run_backtest,
    write_annual_csv,
    write_summary_json,
    write_values_csv,
    write_weights_csv,
)
from .config import daily_vol_cap, load_config
from .cra import RiskAllocation
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateSeriesError,
    EstimatorError,
    ModelError,
    ParameterError,
    ParseError,
    RiskallocError,
    SchemaError,
)
from .marketdata import (
    align_and_compute_returns,
    load_asset_meta,
    load_price_csv,
    synthetic_panel,
    trading_calendar,
)
from .riskmodels import iewma_covariance
from .strategies import (
    StrategyConfig,
    VolEstimatorSpec,
    build_constraints,
    default_relative_weights,
)

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "RISKALLOC_DATA_DIR"
OUT_DIR_ENV = "RISKALLOC_OUT_DIR"

METRIC_LABELS = (
    ("return_pct", "Return (%)"),
    ("volatility_pct", "Volatility (%)"),
    ("sharpe", "Sharpe"),
    ("max_drawdown_pct", "Drawdown (%)"),
    ("avg_cash_pct", "Avg cash (%)"),
)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_panel(cfg: dict, data_dir: Path, seed_override=None):
    """Build the trading-day return panel described by the data section."""
    data = cfg["data"]
    if data["kind"] == "csv":
        assets_path = data_dir / data["assets"]
        prices_path = data_dir / data["prices"]
        for p in (assets_path, prices_path):
            if not p.exists():
                raise DataError(f"missing data file {p}")
        meta = load_asset_meta(assets_path)
        prices = load_price_csv(prices_path, meta)
        panel = align_and_compute_returns(prices, trading_calendar(prices))
        sources = {str(data["assets"]): _sha256(assets_path), str(data["prices"]): _sha256(prices_path)}
    else:
        entries = data["synthetic_assets"]
        seed = int(seed_override) if seed_override is not None else data["seed"]
        panel = synthetic_panel(
            n_assets=len(entries),
            n_days=data["n_days"],
            vols=[e["vol_daily"] for e in entries],
            correlation=np.asarray(data["correlation"]) if isinstance(data["correlation"], list) else data["correlation"],
            seed=seed,
            asset_ids=[e["asset_id"] for e in entries],
            categories=[e["category"] for e in entries],
            start=data["start"],
        )
        sources = {"synthetic_seed": str(seed)}
    if cfg["universe"]:
        panel = panel.select(cfg["universe"])
    return panel, sources


def build_strategy_config(cfg: dict, meta) -> StrategyConfig:
    scfg = cfg["strategy"]
    sigma_daily = daily_vol_cap(cfg)
    constraints = build_constraints(
        meta,
        sigma_daily,
        cfg["constraints"]["category_caps"],
        cfg["constraints"]["asset_caps"],
    )
    universe = tuple(m.asset_id for m in meta)
    if scfg["kind"] == "cra":
        rho = (
            RiskAllocation.parity(len(universe))
            if scfg["rho"] == "equal"
            else RiskAllocation(np.asarray(scfg["rho"], dtype=float))
        )
        return StrategyConfig(
            kind="cra",
            universe=universe,
            constraints=constraints,
            rho=rho,
            use_variation=scfg["use_variation"],
            variation_half_life=scfg["variation_half_life"],
        )
    rel = (
        default_relative_weights(meta)
        if scfg["relative_weights"] == "default"
        else np.asarray(scfg["relative_weights"], dtype=float)
    )
    est = scfg["vol_estimator"]
    spec = (
        VolEstimatorSpec(kind="ewma", half_life=est["half_life"])
        if est["kind"] == "ewma"
        else VolEstimatorSpec(kind="garch", window=est["window"], refit_every=est["refit_every"])
    )
    return StrategyConfig(
        kind="dd9010",
        universe=universe,
        constraints=constraints,
        relative_weights=rel,
        vol_estimator=spec,
    )


def run_from_config(config_path: Path, data_dir: Path, seed=None):
    """Shared pipeline: config -> panel -> covariance (if needed) -> result."""
    cfg = load_config(config_path)
    panel, sources = load_panel(cfg, data_dir, seed)
    strategy_cfg = build_strategy_config(cfg, panel.meta)
    bt_config = BacktestConfig(
        burn_in=cfg["backtest"]["burn_in"],
        annualization_days=cfg["backtest"]["annualization_days"],
        start=cfg["backtest"]["start"],
        end=cfg["backtest"]["end"],
        strategy=strategy_cfg,
    )
    cov = None
    if strategy_cfg.kind == "cra":
        cov = iewma_covariance(
            panel,
            cfg["risk_model"]["vol_half_life"],
            cfg["risk_model"]["corr_half_life"],
        )
    result = run_backtest(panel, cov, bt_config)
    return cfg, panel, result, sources


def write_manifest(out_dir: Path, config_paths, sources: dict, outputs, seed=None) -> None:
    if isinstance(config_paths, Path):
        config_paths = [config_paths]
    manifest = {
        "tool_version": __version__,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "config_sha256": {str(p): _sha256(p) for p in config_paths},
        "data_sources": sources,
        "outputs": sorted(str(o) for o in outputs),
        "seed": seed,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def print_metrics_table(columns: list[tuple[str, dict]], stream=None) -> None:
    stream = stream or sys.stdout
    names = [name for name, _ in columns]
    width = max(16, *(len(n) + 2 for n in names))
    print("Metric".ljust(18) + "".join(n.rjust(width) for n in names), file=stream)
    for key, label in METRIC_LABELS:
        cells = []
        for _, summary in columns:
            value = summary.get(key)
            cells.append("nan" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.2f}")
        print(label.ljust(18) + "".join(c.rjust(width) for c in cells), file=stream)


def cmd_backtest(args) -> int:
    config_path = Path(args.config)
    data_dir, out_dir = _resolve_dirs(args)
    cfg, panel, result, sources = run_from_config(config_path, data_dir, args.seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    outputs = {
        "summary.json": lambda p: write_summary_json(result, p, name=cfg["name"]),
        "weights.csv": lambda p: write_weights_csv(result, p),
        "values.csv": lambda p: write_values_csv(result, p),
        "annual.csv": lambda p: write_annual_csv(result, p),
    }
    for name, writer in outputs.items():
        writer(out_dir / name)
    write_manifest(out_dir, config_path, sources, outputs, args.seed)
    print_metrics_table([(cfg["name"], result.summary)])
    logger.info("artifacts written to %s", out_dir)
    return 0


def cmd_attribute(args) -> int:
    config_path = Path(args.config)
    data_dir, out_dir = _resolve_dirs(args)
    cfg = load_config(config_path)
    if cfg["strategy"]["kind"] != "cra":
        raise ConfigError("attribution is defined for the cra strategy only")
    if cfg["strategy"]["rho"] != "equal":
        raise ConfigError("attribution uses risk parity within each coalition; set rho: equal")
    panel, sources = load_panel(cfg, data_dir, args.seed)

    players = default_players(panel.meta)
    runner = CoalitionBacktestRunner(
        panel=panel,
        sigma_daily=daily_vol_cap(cfg),
        crypto_cap=cfg["constraints"]["category_caps"].get("crypto"),
        burn_in=cfg["backtest"]["burn_in"],
        annualization_days=cfg["backtest"]["annualization_days"],
        vol_half_life=cfg["risk_model"]["vol_half_life"],
        corr_half_life=cfg["risk_model"]["corr_half_life"],
        use_variation=cfg["strategy"]["use_variation"],
        variation_half_life=cfg["strategy"]["variation_half_life"],
        start=cfg["backtest"]["start"],
        end=cfg["backtest"]["end"],
    )
    table = enumerate_coalition_values(players, runner, jobs=args.jobs)
    report = shapley_values(table)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_shapley_csv(report, out_dir / "shapley.csv")
    write_coalitions_csv(table, out_dir / "coalitions.csv")
    write_manifest(out_dir, config_path, sources, ["shapley.csv", "coalitions.csv"], args.seed)

    frame = report.to_frame()
    header = "Metric".ljust(18) + "".join(c.rjust(12) for c in frame.columns)
    print(header)
    for metric, row in frame.iterrows():
        print(metric.ljust(18) + "".join(f"{v:.2f}".rjust(12) for v in row))
    return 0


def cmd_compare(args) -> int:
    if len(args.config) < 2:
        raise ConfigError("compare needs at least two --config files")
    data_dir, out_dir = _resolve_dirs(args)

    runs = []
    seen_names: dict[str, int] = {}
    for config_path in args.config:
        cfg, _, result, _ = run_from_config(Path(config_path), data_dir, args.seed)
        name = cfg["name"]
        seen_names[name] = seen_names.get(name, 0) + 1
        if seen_names[name] > 1:
            name = f"{name}#{seen_names[name]}"
        runs.append((name, result))

    common = runs[0][1].value_series().index
    for _, result in runs[1:]:
        common = common.intersection(result.value_series().index)
    if len(common) < 2:
        ranges = "; ".join(
            f"{name}: {res.decision_dates[0].date()}..{res.realization_dates[-1].date()}"
            for name, res in runs
        )
        raise ConfigError(f"no overlapping dates between runs ({ranges})")

    normalized = []
    for name, result in runs:
        series = result.value_series().loc[common]
        normalized.append((name, series / series.iloc[0]))

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + [name for name, _ in normalized])
        for day in common:
            writer.writerow(
                [day.date().isoformat()] + [format_cell(s.loc[day]) for _, s in normalized]
            )
    write_manifest(out_dir, [Path(p) for p in args.config], {}, ["compare.csv"], args.seed)
    print_metrics_table([(name, res.summary) for name, res in runs])
    logger.info("compare artifacts written to %s", out_dir)
    return 0


def _resolve_dirs(args) -> tuple[Path, Path]:
    data_dir = Path(args.data_dir or os.environ.get(DATA_DIR_ENV, "."))
    out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, "out"))
    return data_dir, out_dir


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskalloc",
        description="Risk-allocation portfolio backtesting over mixed crypto/traditional universes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, multi_config=False):
        if multi_config:
            p.add_argument("--config", action="append", required=True,
                           help="run config file (repeat for each run)")
        else:
            p.add_argument("--config", required=True, help="run config file")
        p.add_argument("--data-dir", default=None,
                       help=f"directory with data files (default: ${DATA_DIR_ENV} or .)")
        p.add_argument("--out-dir", default=None,
                       help=f"directory for artifacts (default: ${OUT_DIR_ENV} or ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the synthetic-data seed from the config")
        p.add_argument("--jobs", type=int, default=1, help="parallel coalition backtests")
        p.add_argument("--verbose", action="store_true", help="debug logging")

    p_bt = sub.add_parser("backtest", help="run one strategy backtest")
    add_common(p_bt)
    p_bt.set_defaults(func=cmd_backtest)

    p_at = sub.add_parser("attribute", help="Shapley attribution over asset categories")
    add_common(p_at)
    p_at.set_defaults(func=cmd_attribute)

    p_cmp = sub.add_parser("compare", help="side-by-side metrics and value paths")
    add_common(p_cmp, multi_config=True)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, SchemaError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ModelError, ConvergenceError, DegenerateSeriesError, EstimatorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except RiskallocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
