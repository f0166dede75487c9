#!/usr/bin/env python3
"""Regenerate the committed synthetic data fixtures under tests/fixtures.

The fixture mimics the real dataset's shape: four industry series priced on
business days only and two crypto series priced on every calendar day, so
the calendar-alignment and weekend-compounding paths are exercised. Output
is deterministic; goldens depend on these files, so regenerate both
together (see scripts/refresh_goldens.py).
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from riskalloc.marketdata import AssetMeta, PricePanel, write_asset_meta, write_price_csv  # noqa: E402

SEED = 20240901
START, END = "2021-01-01", "2022-08-31"

ASSETS = [
    ("Cnsmr", "industry", "Consumer", 0.011, 0.0004),
    ("Manuf", "industry", "Manufacturing", 0.012, 0.0003),
    ("HiTec", "industry", "Technology", 0.014, 0.0005),
    ("Hlth", "industry", "Healthcare", 0.010, 0.0003),
    ("BTC", "crypto", "Bitcoin", 0.040, 0.0012),
    ("ETH", "crypto", "Ethereum", 0.050, 0.0015),
]

CORR = np.array([
    [1.00, 0.55, 0.50, 0.45, 0.15, 0.15],
    [0.55, 1.00, 0.45, 0.40, 0.12, 0.12],
    [0.50, 0.45, 1.00, 0.40, 0.20, 0.20],
    [0.45, 0.40, 0.40, 1.00, 0.10, 0.10],
    [0.15, 0.12, 0.20, 0.10, 1.00, 0.75],
    [0.15, 0.12, 0.12, 0.10, 0.75, 1.00],
])


def main() -> None:
    out = ROOT / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)

    calendar = pd.date_range(START, END, freq="D")
    business = pd.bdate_range(START, END)
    vols = np.array([a[3] for a in ASSETS])
    drifts = np.array([a[4] for a in ASSETS])

    rng = np.random.default_rng(SEED)
    z = rng.standard_normal((len(calendar), len(ASSETS)))
    rets = drifts + (z @ np.linalg.cholesky(CORR).T) * vols

    prices = pd.DataFrame(np.nan, index=calendar, columns=[a[0] for a in ASSETS])
    for j, (aid, category, _, _, _) in enumerate(ASSETS):
        if category == "crypto":
            prices[aid] = 100.0 * np.cumprod(1.0 + rets[:, j])
        else:
            on_bd = calendar.isin(business)
            path = 100.0 * np.cumprod(1.0 + rets[on_bd, j])
            prices.loc[on_bd, aid] = path
    prices.index.name = "date"

    meta = tuple(AssetMeta(a[0], a[1], a[2]) for a in ASSETS)
    panel = PricePanel(frame=prices, meta=meta)
    write_price_csv(panel, out / "prices.csv")
    write_asset_meta(meta, out / "assets.csv")
    print(f"wrote {out / 'prices.csv'} ({len(prices)} rows) and assets.csv")


if __name__ == "__main__":
    main()
