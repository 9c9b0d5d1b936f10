"""Plan loading, result persistence and report files."""

import json
import logging
from pathlib import Path
from typing import Callable, Dict, List

import pandas as pd
from pydantic import ValidationError

from src.backtest.engine import DayForecast
from src.errors import PlanError
from src.evaluation.charts import plot_all
from src.evaluation.metrics import (
    ATTRIBUTION_NOTE,
    lag_diff_report,
    mape_report,
    season_report,
    ssm_composition_report,
    ssm_report,
    write_report,
)
from src.models import BacktestPlan, BacktestResult

logger = logging.getLogger(__name__)

RESULT_FILE = "result.json"
RECORDS_FILE = "records.csv"
FORECAST_HEADER = ["block", "price", "weighting_detail"]


def load_plan(path: Path) -> BacktestPlan:
    """Read a JSON plan; relative data paths resolve against the plan's directory.

    Raises:
        PlanError: if the file is missing, not JSON, or fails validation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PlanError(f"cannot read plan {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanError(f"plan {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise PlanError(f"plan {path} must be a JSON object")
    for key in ("prices_csv", "drivers_csv"):
        if isinstance(raw.get(key), str) and not Path(raw[key]).is_absolute():
            raw[key] = str(path.parent / raw[key])
    try:
        return BacktestPlan.model_validate(raw)
    except ValidationError as exc:
        raise PlanError(f"invalid plan {path}: {exc}") from None


def records_frame(result: BacktestResult) -> pd.DataFrame:
    """Flat view of the records: one row per (date, block), one column per model."""
    models = sorted({m for r in result.records for m in r.forecasts})
    rows = []
    for r in result.records:
        row = {
            "date": r.date.isoformat(),
            "block": r.block,
            "actual": r.actual,
            "combined": r.combined,
            "lag_diff": r.lag_diff,
            "ssm": ";".join(r.ssm),
        }
        row.update({m: r.forecasts.get(m) for m in models})
        rows.append(row)
    return pd.DataFrame(rows, columns=["date", "block", "actual", "combined", "lag_diff", "ssm", *models])


def save_result(result: BacktestResult, out_dir: Path) -> Path:
    """Write result.json (the full result) and records.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / RESULT_FILE).write_text(result.model_dump_json(), encoding="utf-8")
    write_report(records_frame(result), out_dir / RECORDS_FILE)
    return out_dir / RESULT_FILE


def load_result(result_dir: Path) -> BacktestResult:
    """Read a stored result.

    Raises:
        PlanError: if the directory holds no readable result
    """
    path = Path(result_dir) / RESULT_FILE
    try:
        return BacktestResult.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise PlanError(f"cannot read stored result {path}: {exc.strerror}") from None
    except ValidationError as exc:
        raise PlanError(f"stored result {path} is invalid: {exc}") from None


def _mape(result: BacktestResult, out_dir: Path) -> List[Path]:
    paths = [out_dir / "mape_daily.csv", out_dir / "mape_blockwise.csv"]
    write_report(mape_report(result, "daily"), paths[0])
    write_report(mape_report(result, "blockwise"), paths[1])
    return paths


def _lagdiff(result: BacktestResult, out_dir: Path) -> List[Path]:
    path = out_dir / "lag_diff.csv"
    write_report(lag_diff_report(result), path, comment=ATTRIBUTION_NOTE)
    return [path]


def _season(result: BacktestResult, out_dir: Path) -> List[Path]:
    paths = [out_dir / "season.csv", out_dir / "ssm_composition.csv"]
    write_report(season_report(result), paths[0])
    write_report(ssm_composition_report(result), paths[1])
    return paths


def _charts(result: BacktestResult, out_dir: Path) -> List[Path]:
    return plot_all(result, out_dir / "charts")


REPORT_KINDS: Dict[str, Callable[[BacktestResult, Path], List[Path]]] = {
    "mape": _mape,
    "lagdiff": _lagdiff,
    "season": _season,
    "charts": _charts,
}


def write_kind(result: BacktestResult, kind: str, out_dir: Path) -> List[Path]:
    """Regenerate one report family from a stored result."""
    if kind not in REPORT_KINDS:
        raise ValueError(f"unknown report kind '{kind}'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return REPORT_KINDS[kind](result, out_dir)


def write_reports(result: BacktestResult, out_dir: Path) -> List[Path]:
    """Every CSV report of a backtest (charts are produced on request only)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "ssm.csv", out_dir / "mcs_detail.csv", out_dir / "failures.csv", out_dir / "skipped.csv"]
    write_report(ssm_report(result, survivors_only=True), paths[0])
    write_report(ssm_report(result, survivors_only=False), paths[1])
    failures = pd.DataFrame(
        [(f.date.isoformat(), f.model, f.reason) for f in result.failures],
        columns=["date", "model", "reason"],
    )
    write_report(failures, paths[2])
    skipped = pd.DataFrame(sorted(result.skipped.items()), columns=["model", "reason"])
    write_report(skipped, paths[3])
    if not result.records:
        logger.warning("no evaluated records; MAPE, Lag_Diff and season reports not written")
        return paths
    for kind in ("mape", "lagdiff", "season"):
        paths.extend(write_kind(result, kind, out_dir))
    return paths


def forecast_frame(forecast: DayForecast) -> pd.DataFrame:
    """Rows `block,price,weighting_detail`; detail lists `model=weight` pairs by name."""
    rows = []
    for b, (price, weights) in enumerate(zip(forecast.combined.values, forecast.combined.weights), start=1):
        detail = ";".join(f"{m}={weights[m]:.6f}" for m in sorted(weights))
        rows.append((b, float(price), detail))
    return pd.DataFrame(rows, columns=FORECAST_HEADER)


def write_forecast(forecast: DayForecast, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"forecast_{forecast.date.isoformat()}.csv"
    write_report(forecast_frame(forecast), path)
    return path
