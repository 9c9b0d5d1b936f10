"""MAPE metrics and the tabular reports built from a backtest result."""

import datetime as dt
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.mcs.confidence_set import BLOCK_GROUPS, block_group
from src.models import BLOCKS_PER_DAY, BacktestRecord, BacktestResult, ModelClass
from src.series.windows import LAG_DIFF_BUCKETS, lag_diff_bucket

logger = logging.getLogger(__name__)

PRICE_FLOOR = 0.01
COMBINED = "combined"
ATTRIBUTION_NOTE = (
    "# shares count blocks; each block is attributed to the model class of its highest-weight SSM member;"
    " equal-weight fallback blocks are left out"
)
SEASONS: Tuple[Tuple[str, Tuple[int, ...]], ...] = (
    ("Winter", (12, 1, 2)),
    ("Spring", (3, 4)),
    ("Summer", (5, 6)),
    ("Monsoon", (7, 8, 9)),
    ("Fall", (10, 11)),
)


class MapeResult(BaseModel):
    """MAPE with the exclusion count for near-zero actuals."""
    value: Optional[float]
    included: int
    excluded: int


def season_of(day: dt.date) -> str:
    for name, months in SEASONS:
        if day.month in months:
            return name
    raise ValueError(f"no season for month {day.month}")


def ape(actuals: Sequence[float], forecasts: Sequence[float]) -> np.ndarray:
    """Absolute percentage errors; NaN where the actual is at or below the floor."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape:
        raise ValueError("actuals and forecasts must have equal length")
    out = np.full(a.shape, np.nan)
    ok = a > PRICE_FLOOR
    out[ok] = np.abs(a[ok] - f[ok]) / a[ok] * 100.0
    return out


def mape_detail(actuals: Sequence[float], forecasts: Sequence[float]) -> MapeResult:
    errors = ape(actuals, forecasts)
    if errors.size == 0:
        raise ValueError("MAPE needs at least one record")
    included = int(np.isfinite(errors).sum())
    excluded = errors.size - included
    if excluded:
        logger.info("MAPE excluded %d records with actual <= %.2f", excluded, PRICE_FLOOR)
    value = float(np.nanmean(errors)) if included else None
    return MapeResult(value=value, included=included, excluded=excluded)


def mape(actuals: Sequence[float], forecasts: Sequence[float]) -> float:
    """100 x mean(|a - f| / a) over actuals above the floor.

    Raises:
        ValueError: on unequal or empty input, or when every record is excluded
    """
    result = mape_detail(actuals, forecasts)
    if result.value is None:
        raise ValueError("every record excluded from MAPE")
    return result.value


def _sources(result: BacktestResult) -> List[str]:
    models = sorted({m for r in result.records for m in r.forecasts})
    return [COMBINED] + models


def _frame(result: BacktestResult) -> pd.DataFrame:
    """Long table: one row per (date, block, source) with its APE."""
    rows = []
    for r in result.records:
        values = {COMBINED: r.combined, **r.forecasts}
        for source, forecast in values.items():
            error = ape([r.actual], [forecast])[0]
            rows.append((r.date, r.block, source, error))
    return pd.DataFrame(rows, columns=["date", "block", "source", "ape"])


def mape_report(result: BacktestResult, granularity: str = "daily") -> pd.DataFrame:
    """Daily or blockwise MAPE per source, with the variance across the grouping.

    Daily rows group a day's 96 block errors; blockwise rows group one block
    across days. Columns: key, `<source>_mape`, `<source>_var`, `excluded`.
    """
    if not result.records:
        raise ValueError("empty backtest result")
    if granularity not in ("daily", "blockwise"):
        raise ValueError(f"unknown granularity '{granularity}'")
    key = "date" if granularity == "daily" else "block"
    frame = _frame(result)
    grouped = frame.groupby([key, "source"])["ape"]
    stats = pd.DataFrame({
        "mape": grouped.mean(),
        "var": grouped.var(ddof=0),
    }).reset_index()
    table = stats.pivot(index=key, columns="source", values=["mape", "var"])
    out = pd.DataFrame(index=table.index)
    for source in _sources(result):
        if ("mape", source) in table.columns:
            out[f"{source}_mape"] = table[("mape", source)]
            out[f"{source}_var"] = table[("var", source)]
    combined = frame[frame["source"] == COMBINED]
    out["excluded"] = combined.groupby(key)["ape"].apply(lambda s: int(s.isna().sum()))
    out = out.reset_index().sort_values(key, kind="stable").reset_index(drop=True)
    if granularity == "daily":
        out["date"] = [d.isoformat() for d in out["date"]]
    return out


def top_member(record: BacktestRecord) -> str:
    """Highest-weight SSM member; ties go to the lexicographically first name."""
    return min(record.weights, key=lambda m: (-record.weights[m], m))


def lag_diff_report(result: BacktestResult) -> pd.DataFrame:
    """Share of blocks attributed to each model class per Lag_Diff bucket.

    One pair of rows (univariate, multivariate) per month plus an `all` pair;
    empty buckets are left blank. Blocks weighted by the equal-weight fallback
    have no highest-weight member and are left out.

    Raises:
        ValueError: on an empty result or a top member without a recorded model class
    """
    if not result.records:
        raise ValueError("empty backtest result")
    counts: Dict[Tuple[str, str], Dict[ModelClass, int]] = defaultdict(lambda: defaultdict(int))
    skipped = untested = 0
    for r in result.records:
        if r.lag_diff is None:
            skipped += 1
            continue
        if r.fallback and len(r.weights) > 1:
            untested += 1
            continue
        top = top_member(r)
        if top not in result.model_classes:
            raise ValueError(f"no model class recorded for {top}")
        model_class = result.model_classes[top]
        bucket = lag_diff_bucket(r.lag_diff)
        for period in (r.date.strftime("%Y-%m"), "all"):
            counts[(period, bucket)][model_class] += 1
    if skipped:
        logger.info("lag_diff report skipped %d records without a day-earlier price", skipped)
    if untested:
        logger.info("lag_diff report left out %d equal-weight fallback records", untested)

    periods = sorted({p for p, _ in counts if p != "all"}) + ["all"]
    rows = []
    for period in periods:
        for model_class in ModelClass:
            row = {"period": period, "model_class": model_class.value}
            for bucket in LAG_DIFF_BUCKETS:
                tally = counts.get((period, bucket))
                total = sum(tally.values()) if tally else 0
                row[bucket] = round(100.0 * tally[model_class] / total, 1) if total else np.nan
            rows.append(row)
    return pd.DataFrame(rows, columns=["period", "model_class", *LAG_DIFF_BUCKETS])


def season_report(result: BacktestResult) -> pd.DataFrame:
    """Combined MAPE per season with the period covered and the best single model."""
    if not result.records:
        raise ValueError("empty backtest result")
    frame = _frame(result)
    frame["season"] = [season_of(d) for d in frame["date"]]
    rows = []
    for name, _ in SEASONS:
        part = frame[frame["season"] == name]
        if part.empty:
            continue
        combined = part[part["source"] == COMBINED]
        by_model = part[part["source"] != COMBINED].groupby("source")["ape"].mean().dropna()
        best = by_model.sort_index().idxmin() if not by_model.empty else ""
        rows.append({
            "season": name,
            "period_start": min(part["date"]).isoformat(),
            "period_end": max(part["date"]).isoformat(),
            "zone": result.zone.value,
            "combined_mape": combined["ape"].mean(),
            "combined_var": combined.groupby("date")["ape"].mean().var(ddof=0),
            "best_model": best,
            "best_model_mape": by_model.get(best, np.nan) if best else np.nan,
            "records": int(combined["ape"].notna().sum()),
        })
    return pd.DataFrame(rows)


def ssm_composition_report(result: BacktestResult) -> pd.DataFrame:
    """How often each model sits in the SSM per (season, intraday block group)."""
    if not result.records:
        raise ValueError("empty backtest result")
    totals: Dict[Tuple[str, int], int] = defaultdict(int)
    hits: Dict[Tuple[str, int, str], int] = defaultdict(int)
    for r in result.records:
        key = (season_of(r.date), block_group(r.block))
        totals[key] += 1
        for m in r.ssm:
            hits[(*key, m)] += 1
    rows = []
    for (season, group, model), count in sorted(hits.items()):
        lo, hi = BLOCK_GROUPS[group]
        rows.append({
            "season": season,
            "block_group": f"{lo}-{hi}",
            "model": model,
            "share": round(100.0 * count / totals[(season, group)], 1),
        })
    return pd.DataFrame(rows, columns=["season", "block_group", "model", "share"])


def ssm_report(result: BacktestResult, survivors_only: bool = True) -> pd.DataFrame:
    """Rows `date,block,model,mcs_pvalue,mean_loss,weight,eliminated_at`."""
    rows = [
        s.model_dump() for s in result.selections
        if not survivors_only or s.eliminated_at is None
    ]
    columns = ["date", "block", "model", "mcs_pvalue", "mean_loss", "weight", "eliminated_at"]
    frame = pd.DataFrame(rows, columns=columns)
    if not frame.empty:
        frame["date"] = [d.isoformat() for d in frame["date"]]
        frame["eliminated_at"] = frame["eliminated_at"].astype("Int64")
    return frame


def write_report(frame: pd.DataFrame, path: Path, comment: Optional[str] = None) -> None:
    """Write a report CSV, optionally preceded by one comment line."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if comment:
            handle.write(comment + "\n")
        frame.to_csv(handle, index=False, lineterminator="\n", na_rep="")


def daily_values(result: BacktestResult, day: dt.date) -> Dict[str, np.ndarray]:
    """Actual, combined and per-model series for one day (NaN where absent)."""
    records = sorted((r for r in result.records if r.date == day), key=lambda r: r.block)
    out: Dict[str, np.ndarray] = {"actual": np.full(BLOCKS_PER_DAY, np.nan), COMBINED: np.full(BLOCKS_PER_DAY, np.nan)}
    for r in records:
        out["actual"][r.block - 1] = r.actual
        out[COMBINED][r.block - 1] = r.combined
        for m, v in r.forecasts.items():
            out.setdefault(m, np.full(BLOCKS_PER_DAY, np.nan))[r.block - 1] = v
    return out
