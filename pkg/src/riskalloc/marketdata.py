"""Price ingestion, trading-calendar alignment, and return panels.

Crypto assets trade every calendar day while the industry series only trade
on market days. Panels therefore carry prices on a mixed calendar with
missing values explicitly marked, and returns are computed between
consecutive *trading* dates so that weekend crypto moves compound into the
next trading-day return.

All containers are treated as immutable after construction.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date as Date
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DataError, ParameterError, ParseError, SchemaError

logger = logging.getLogger(__name__)

INDUSTRY = "industry"
CRYPTO = "crypto"
CATEGORIES = (INDUSTRY, CRYPTO)

DateLike = Union[str, Date, pd.Timestamp]


def _as_timestamp(d: DateLike) -> pd.Timestamp:
    return pd.Timestamp(d).normalize()


@dataclass(frozen=True)
class AssetMeta:
    """Identity and category of one asset."""

    asset_id: str
    category: str
    display_name: str = ""

    def __post_init__(self):
        if not self.asset_id:
            raise ParameterError("asset_id must be a non-empty string")
        if self.category not in CATEGORIES:
            raise ParameterError(
                f"asset {self.asset_id!r}: category must be one of {CATEGORIES}, "
                f"got {self.category!r}"
            )
        if not self.display_name:
            object.__setattr__(self, "display_name", self.asset_id)


def _check_meta(meta: Sequence[AssetMeta]) -> tuple[AssetMeta, ...]:
    meta = tuple(meta)
    if not meta:
        raise ParameterError("meta must contain at least one asset")
    ids = [m.asset_id for m in meta]
    if len(set(ids)) != len(ids):
        dupes = sorted({a for a in ids if ids.count(a) > 1})
        raise ParameterError(f"duplicate asset_id in meta: {dupes}")
    return meta


@dataclass(frozen=True)
class PricePanel:
    """Daily close prices on a calendar of dates, missing values as NaN."""

    frame: pd.DataFrame  # DatetimeIndex x asset_id columns
    meta: tuple[AssetMeta, ...]

    def __post_init__(self):
        meta = _check_meta(self.meta)
        object.__setattr__(self, "meta", meta)
        frame = self.frame
        if list(frame.columns) != [m.asset_id for m in meta]:
            raise ParameterError("price columns must match meta asset ids in order")
        if not frame.index.is_unique:
            raise SchemaError("duplicate dates in price panel")
        if not frame.index.is_monotonic_increasing:
            raise ParameterError("price panel dates must be strictly increasing")
        vals = frame.to_numpy(dtype=float)
        bad = ~np.isnan(vals) & ~(vals > 0.0)
        if bad.any():
            t, j = np.argwhere(bad)[0]
            raise DataError(
                f"non-positive price {vals[t, j]!r} for asset "
                f"{frame.columns[j]!r} on {frame.index[t].date()}"
            )

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(m.asset_id for m in self.meta)

    def __len__(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class ReturnPanel:
    """Simple returns per trading-day interval, one row per trading date."""

    frame: pd.DataFrame  # DatetimeIndex x asset_id columns, no NaN
    meta: tuple[AssetMeta, ...]

    def __post_init__(self):
        meta = _check_meta(self.meta)
        object.__setattr__(self, "meta", meta)
        frame = self.frame
        if list(frame.columns) != [m.asset_id for m in meta]:
            raise ParameterError("return columns must match meta asset ids in order")
        if not frame.index.is_unique or not frame.index.is_monotonic_increasing:
            raise ParameterError("return panel dates must be strictly increasing")
        vals = frame.to_numpy(dtype=float)
        if np.isnan(vals).any():
            t, j = np.argwhere(np.isnan(vals))[0]
            raise DataError(
                f"missing return for asset {frame.columns[j]!r} on "
                f"{frame.index[t].date()}"
            )
        if not (vals > -1.0).all():
            t, j = np.argwhere(~(vals > -1.0))[0]
            raise DataError(
                f"return {vals[t, j]!r} <= -1 for asset {frame.columns[j]!r} "
                f"on {frame.index[t].date()}"
            )

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(m.asset_id for m in self.meta)

    @property
    def values(self) -> np.ndarray:
        # canonical row-major layout: pandas block order varies with the
        # frame's history, and BLAS reductions over strided rows round
        # differently, breaking bitwise reproducibility
        return np.ascontiguousarray(self.frame.to_numpy(dtype=float))

    def __len__(self) -> int:
        return len(self.frame)

    def select(self, asset_ids: Sequence[str]) -> "ReturnPanel":
        """Restrict to a subset of assets, keeping this panel's column order."""
        wanted = set(asset_ids)
        unknown = wanted - set(self.asset_ids)
        if unknown:
            raise ParameterError(f"unknown asset ids: {sorted(unknown)}")
        keep = [m for m in self.meta if m.asset_id in wanted]
        cols = [m.asset_id for m in keep]
        return ReturnPanel(frame=self.frame[cols], meta=tuple(keep))

    def slice_dates(self, start: Optional[DateLike], end: Optional[DateLike]) -> "ReturnPanel":
        mask = np.ones(len(self.frame), dtype=bool)
        if start is not None:
            mask &= self.frame.index >= _as_timestamp(start)
        if end is not None:
            mask &= self.frame.index <= _as_timestamp(end)
        return ReturnPanel(frame=self.frame.loc[mask], meta=self.meta)


def load_asset_meta(path) -> tuple[AssetMeta, ...]:
    """Read the asset metadata file (asset_id,category,display_name)."""
    metas = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty metadata file")
        if [h.strip() for h in header] != ["asset_id", "category", "display_name"]:
            raise SchemaError(
                f"{path}: expected header 'asset_id,category,display_name', got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            metas.append(AssetMeta(row[0].strip(), row[1].strip(), row[2].strip()))
    return _check_meta(metas)


def load_price_csv(path, meta: Sequence[AssetMeta]) -> PricePanel:
    """Load a close-price CSV with header ``date,<asset_id>,...``.

    Empty cells mark missing prices. Rows are sorted by date; duplicate
    dates are rejected.
    """
    meta = _check_meta(meta)
    ids = [m.asset_id for m in meta]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read price file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty price file")
        header = [h.strip() for h in header]
        if not header or header[0] != "date":
            raise SchemaError(f"{path}: first column must be 'date', got {header[:1]}")
        cols = header[1:]
        if len(set(cols)) != len(cols):
            raise SchemaError(f"{path}: duplicate columns in header")
        unknown = [c for c in cols if c not in ids]
        if unknown:
            raise SchemaError(f"{path}: unknown asset columns {unknown}")
        missing = [a for a in ids if a not in cols]
        if missing:
            raise SchemaError(f"{path}: missing asset columns {missing}")
        pos = {c: k for k, c in enumerate(cols)}

        dates: list[pd.Timestamp] = []
        rows: list[list[float]] = []
        seen: set[pd.Timestamp] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                day = pd.Timestamp(Date.fromisoformat(row[0].strip()))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad date {row[0]!r}: {exc}") from exc
            if day in seen:
                raise SchemaError(f"{path}:{lineno}: duplicate date {row[0]}")
            seen.add(day)
            prices = []
            for aid in ids:
                cell = row[1 + pos[aid]].strip()
                if cell == "":
                    prices.append(np.nan)
                    continue
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise ParseError(
                        f"{path}:{lineno}: bad price {cell!r} for {aid}: {exc}"
                    ) from exc
                if not np.isfinite(value) or value <= 0.0:
                    raise DataError(
                        f"{path}:{lineno}: non-positive price {cell} for {aid}"
                    )
                prices.append(value)
            dates.append(day)
            rows.append(prices)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    order = np.argsort(np.asarray(dates))
    frame = pd.DataFrame(
        np.asarray(rows, dtype=float)[order],
        index=pd.DatetimeIndex(np.asarray(dates)[order], name="date"),
        columns=ids,
    )
    return PricePanel(frame=frame, meta=meta)


def write_price_csv(panel: PricePanel, path) -> None:
    """Write a PricePanel so that :func:`load_price_csv` round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(panel.asset_ids))
        vals = panel.frame.to_numpy(dtype=float)
        for t, day in enumerate(panel.dates):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in vals[t]]
            writer.writerow([day.date().isoformat()] + cells)


def write_asset_meta(meta: Sequence[AssetMeta], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["asset_id", "category", "display_name"])
        for m in meta:
            writer.writerow([m.asset_id, m.category, m.display_name])


def trading_calendar(panel: PricePanel) -> pd.DatetimeIndex:
    """Dates on which every industry asset has a price.

    The market calendar is derived from the data itself rather than an
    external calendar source.
    """
    industry_cols = [m.asset_id for m in panel.meta if m.category == INDUSTRY]
    if not industry_cols:
        raise ParameterError(
            "trading calendar requires at least one industry asset in the panel"
        )
    mask = panel.frame[industry_cols].notna().all(axis=1)
    return panel.frame.index[mask]


def align_and_compute_returns(
    panel: PricePanel, calendar: pd.DatetimeIndex
) -> ReturnPanel:
    """Compute simple returns between consecutive trading dates.

    For crypto assets the price ratio spans intervening non-trading days, so
    weekend moves compound into the next trading-day return. A missing
    crypto price on a trading date is forward-filled from the previous close
    (crypto trades continuously; gaps are data artifacts) with a warning.
    """
    calendar = pd.DatetimeIndex(calendar)
    if not calendar.is_monotonic_increasing or not calendar.is_unique:
        raise ParameterError("calendar must be strictly increasing")
    if len(calendar) < 2:
        raise DataError("calendar must contain at least two trading dates")
    outside = calendar.difference(panel.dates)
    if len(outside):
        raise DataError(
            f"calendar date {outside[0].date()} not present in the price panel"
        )

    aligned = {}
    for m in panel.meta:
        series = panel.frame[m.asset_id]
        if m.category == CRYPTO:
            filled = series.ffill()
            px = filled.loc[calendar]
            gaps = series.loc[calendar].isna() & px.notna()
            if gaps.any():
                n = int(gaps.sum())
                logger.warning(
                    "forward-filled %d missing %s price(s), first on %s",
                    n, m.asset_id, px.index[gaps][0].date(),
                )
        else:
            px = series.loc[calendar]
        if px.isna().any():
            first = px.index[px.isna()][0]
            raise DataError(
                f"missing price for asset {m.asset_id!r} on {first.date()}"
            )
        aligned[m.asset_id] = px.to_numpy(dtype=float)

    rets = {aid: px[1:] / px[:-1] - 1.0 for aid, px in aligned.items()}
    frame = pd.DataFrame(rets, index=calendar[1:].rename("date"))
    return ReturnPanel(frame=frame, meta=panel.meta)


def synthetic_panel(
    n_assets: int,
    n_days: int,
    vols,
    correlation,
    seed: int,
    *,
    asset_ids: Optional[Sequence[str]] = None,
    categories: Optional[Sequence[str]] = None,
    start: DateLike = "2020-01-01",
) -> ReturnPanel:
    """Deterministic Gaussian return panel for fixtures and property tests.

    ``vols`` is a per-asset daily volatility (scalar broadcasts);
    ``correlation`` is either a pairwise scalar or a full correlation matrix
    and must be positive definite.
    """
    if n_assets < 1 or n_days < 1:
        raise ParameterError("n_assets and n_days must be positive")
    vols = np.broadcast_to(np.asarray(vols, dtype=float), (n_assets,)).copy()
    if not np.isfinite(vols).all() or (vols < 0).any():
        raise ParameterError("volatilities must be finite and >= 0")
    if np.isscalar(correlation):
        corr = np.full((n_assets, n_assets), float(correlation))
        np.fill_diagonal(corr, 1.0)
    else:
        corr = np.asarray(correlation, dtype=float)
    if corr.shape != (n_assets, n_assets):
        raise ParameterError(f"correlation must be {n_assets}x{n_assets}")
    if not np.allclose(corr, corr.T, atol=1e-12) or not np.allclose(
        np.diag(corr), 1.0, atol=1e-12
    ):
        raise ParameterError("correlation must be symmetric with unit diagonal")
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise ParameterError("correlation matrix is not positive definite") from exc

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_days, n_assets))
    rets = (z @ chol.T) * vols

    if asset_ids is None:
        asset_ids = [f"A{k}" for k in range(n_assets)]
    if categories is None:
        categories = [INDUSTRY] * n_assets
    meta = tuple(
        AssetMeta(aid, cat) for aid, cat in zip(asset_ids, categories)
    )
    dates = _business_days(_as_timestamp(start), n_days)
    return ReturnPanel(frame=pd.DataFrame(rets, index=dates, columns=list(asset_ids)), meta=meta)


def _business_days(start: pd.Timestamp, n_days: int) -> pd.DatetimeIndex:
    # second resolution keeps very long horizons within the timestamp range
    days = np.busday_offset(
        np.datetime64(start.date().isoformat(), "D"), np.arange(n_days), roll="forward"
    )
    unit = "ns" if days[-1] < np.datetime64("2260-01-01") else "s"
    return pd.DatetimeIndex(days.astype(f"datetime64[{unit}]"), name="date")
