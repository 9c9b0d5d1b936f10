"""Rolling day-ahead backtest: refit, forecast, select and combine day by day."""

import datetime as dt
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.backtest.registry import ModelRegistry, default_registry, needs_drivers
from src.backtest.runners import ModelRunner, required_driver_days, required_price_days
from src.config import get_settings, resolve_seed
from src.errors import AllModelsFailedError, PlanError, ThinMarketError
from src.evaluation.metrics import ape
from src.mcs.confidence_set import McsEnsemble, combine_blocks
from src.models import (
    BLOCKS_PER_DAY,
    BacktestPlan,
    BacktestRecord,
    BacktestResult,
    BlockTimestamp,
    CombinedForecast,
    DriverMatrix,
    ModelFailure,
    ModelForecast,
    ModelSpec,
    PriceSeries,
    SsmReportRow,
    SuperiorSet,
)
from src.parser.market_parser import load_driver_file, load_price_file
from src.series.windows import full_days_before, truncate, truncate_drivers, try_lag_diff

logger = logging.getLogger(__name__)

# per-model errors that exclude a model for one day instead of stopping the run
MODEL_ERRORS = (ThinMarketError, ValueError, FloatingPointError, np.linalg.LinAlgError)

ProgressCallback = Callable[[dt.date, int, int], None]


class DayForecast(BaseModel):
    """Combined and member forecasts for one delivery day."""
    date: dt.date
    combined: CombinedForecast
    forecasts: Dict[str, ModelForecast]
    sets: List[SuperiorSet] = Field(..., description="Superior set per block")
    failures: List[ModelFailure] = Field(default_factory=list)
    skipped: Dict[str, str] = Field(default_factory=dict)


def days_between(first: dt.date, last: dt.date) -> Iterator[dt.date]:
    day = first
    while day <= last:
        yield day
        day += dt.timedelta(days=1)


class BacktestEngine:
    """Daily refit of every feasible model with MCS combination of their forecasts."""

    def __init__(
        self,
        plan: BacktestPlan,
        prices: PriceSeries,
        drivers: Optional[DriverMatrix] = None,
        registry: Optional[ModelRegistry] = None,
        jobs: Optional[int] = None,
    ):
        self.plan = plan
        self.prices = prices
        self.drivers = drivers
        self.specs = (registry or default_registry()).resolve(
            plan.models, plan.window_overrides, plan.param_overrides
        )
        self.seed = resolve_seed(plan.seed)
        self.ensemble = McsEnsemble(plan.mcs.model_copy(update={"seed": resolve_seed(plan.mcs.seed)}))
        self.runner = ModelRunner(seed=self.seed)
        self.jobs = jobs or plan.jobs or get_settings().jobs
        self.active: List[ModelSpec] = []
        self.loss_history: Dict[dt.date, Dict[str, np.ndarray]] = {}

    @property
    def earliest_day(self) -> dt.date:
        """First day with at least one complete day of prices before it."""
        first_full = self.prices.start.date if self.prices.start.block == 1 else self.prices.start.date + dt.timedelta(days=1)
        return first_full + dt.timedelta(days=1)

    def feasibility(self, first_day: dt.date) -> Tuple[List[ModelSpec], Dict[str, str]]:
        """Split the subset into models that can forecast `first_day` and skipped ones."""
        price_days = full_days_before(self.prices.start, first_day)
        driver_days = full_days_before(self.drivers.start, first_day) if self.drivers is not None else 0
        screen_days = self.runner.pipeline.screen_days
        active, skipped = [], {}
        for spec in self.specs:
            need = required_price_days(spec)
            if need > price_days:
                skipped[spec.name] = f"needs {need} days of prices before {first_day}, {price_days} available"
            elif needs_drivers(spec) and self.drivers is None:
                skipped[spec.name] = "needs a driver file"
            elif needs_drivers(spec) and required_driver_days(spec, screen_days) > driver_days:
                need = required_driver_days(spec, screen_days)
                skipped[spec.name] = f"needs {need} days of drivers before {first_day}, {driver_days} available"
            else:
                active.append(spec)
        return active, skipped

    def refresh_active(self, day: dt.date) -> None:
        """Admit models whose training window fits before `day`.

        Data only grows with the day, so a model once admitted stays active.
        """
        active, _ = self.feasibility(day)
        known = {s.name for s in self.active}
        for spec in active:
            if spec.name not in known and self.active:
                logger.info("%s joins on %s", spec.name, day)
        self.active = active

    def forecast_models(self, day: dt.date) -> Tuple[Dict[str, ModelForecast], List[ModelFailure]]:
        """Fit every active model on data up to the end of day - 1 and forecast `day`.

        Raises:
            AllModelsFailedError: if no model produced a forecast
        """
        last = BlockTimestamp.last_of(day - dt.timedelta(days=1))
        prices = truncate(self.prices, last)
        drivers = truncate_drivers(self.drivers, last) if self.drivers is not None else None

        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            futures = {
                spec.name: pool.submit(self.runner.forecast, spec, prices, drivers, day)
                for spec in self.active
            }
        forecasts: Dict[str, ModelForecast] = {}
        failures: List[ModelFailure] = []
        for spec in self.active:
            try:
                forecasts[spec.name] = futures[spec.name].result()
            except MODEL_ERRORS as exc:
                reason = f"{type(exc).__name__}: {exc}"
                logger.warning("%s excluded on %s: %s", spec.name, day, reason)
                failures.append(ModelFailure(date=day, model=spec.name, reason=reason))
        if not forecasts:
            raise AllModelsFailedError(f"every model failed on {day}")
        return forecasts, failures

    def actuals(self, day: dt.date) -> np.ndarray:
        """Observed prices of `day`, NaN where missing or outside the data."""
        out = np.full(BLOCKS_PER_DAY, np.nan)
        first = self.prices.position(BlockTimestamp.first_of(day))
        lo, hi = max(first, 0), min(first + BLOCKS_PER_DAY, len(self.prices))
        if lo < hi:
            out[lo - first:hi - first] = self.prices.values[lo:hi]
        return out

    def record_losses(self, day: dt.date, forecasts: Dict[str, ModelForecast]) -> None:
        actual = self.actuals(day)
        if np.isnan(actual).all():
            return
        self.loss_history[day] = {m: ape(actual, f.values) for m, f in forecasts.items()}

    def combine_day(self, day: dt.date, forecasts: Dict[str, ModelForecast]) -> Tuple[CombinedForecast, List[SuperiorSet]]:
        sets = self.ensemble.select_day(day, list(forecasts), self.loss_history)
        return combine_blocks(sets, forecasts), sets

    def run(self, progress: Optional[ProgressCallback] = None) -> BacktestResult:
        """Roll over the warm-up and evaluation days.

        Raises:
            PlanError: if the data cannot cover the evaluation range or no model is feasible
            AllModelsFailedError: if every model fails on one day
        """
        plan = self.plan
        if plan.evaluation_end > self.prices.end.date:
            raise PlanError(f"evaluation ends {plan.evaluation_end} but prices end {self.prices.end}")
        if plan.evaluation_start < self.earliest_day:
            raise PlanError(f"evaluation starts {plan.evaluation_start}, before the first forecastable day {self.earliest_day}")
        first = max(plan.evaluation_start - dt.timedelta(days=plan.effective_warmup), self.earliest_day)
        if not self.feasibility(plan.evaluation_start)[0]:
            raise PlanError("no model in the subset has enough history for this dataset")
        # models that cannot reach even the last evaluation day never forecast
        _, skipped = self.feasibility(plan.evaluation_end)
        for name, reason in skipped.items():
            logger.warning("skipping %s: %s", name, reason)

        result = BacktestResult(
            zone=self.prices.zone,
            model_classes={s.name: s.model_class for s in self.specs},
            skipped=skipped,
        )
        self.active = []
        total = (plan.evaluation_end - first).days + 1
        for index, day in enumerate(days_between(first, plan.evaluation_end), start=1):
            self.refresh_active(day)
            if not self.active:
                logger.debug("no model feasible yet on %s", day)
                if progress is not None:
                    progress(day, index, total)
                continue
            forecasts, failures = self.forecast_models(day)
            result.failures.extend(failures)
            if day >= plan.evaluation_start:
                combined, sets = self.combine_day(day, forecasts)
                result.records.extend(self._records(day, forecasts, combined, sets))
                result.selections.extend(self._selections(day, sets))
            self.record_losses(day, forecasts)
            if progress is not None:
                progress(day, index, total)
        logger.info(
            "backtest finished: %d records, %d failures, %d skipped models",
            len(result.records), len(result.failures), len(skipped),
        )
        return result

    def forecast_day(self, day: dt.date) -> DayForecast:
        """Combined forecast of one day, warming the loss window on the days before it.

        Raises:
            PlanError: if prices do not reach the end of the day before
        """
        if self.prices.end < BlockTimestamp.last_of(day - dt.timedelta(days=1)):
            raise PlanError(f"forecasting {day} needs prices through {day - dt.timedelta(days=1)}, data ends {self.prices.end}")
        if day < self.earliest_day:
            raise PlanError(f"{day} is before the first forecastable day {self.earliest_day}")
        first = max(day - dt.timedelta(days=self.plan.mcs.window_days), self.earliest_day)
        _, skipped = self.feasibility(day)
        for name, reason in skipped.items():
            logger.warning("skipping %s: %s", name, reason)
        if len(skipped) == len(self.specs):
            raise PlanError("no model in the subset has enough history for this dataset")
        self.active = []
        for past in days_between(first, day - dt.timedelta(days=1)):
            self.refresh_active(past)
            if self.active:
                forecasts, _ = self.forecast_models(past)
                self.record_losses(past, forecasts)
        self.refresh_active(day)
        forecasts, failures = self.forecast_models(day)
        combined, sets = self.combine_day(day, forecasts)
        return DayForecast(
            date=day, combined=combined, forecasts=forecasts, sets=sets, failures=failures, skipped=skipped,
        )

    def _records(
        self,
        day: dt.date,
        forecasts: Dict[str, ModelForecast],
        combined: CombinedForecast,
        sets: List[SuperiorSet],
    ) -> List[BacktestRecord]:
        actual = self.actuals(day)
        start = BlockTimestamp.first_of(day)
        records = []
        for b in range(BLOCKS_PER_DAY):
            if np.isnan(actual[b]):
                continue
            ss = sets[b]
            records.append(BacktestRecord(
                date=day,
                block=b + 1,
                actual=float(actual[b]),
                forecasts={m: float(f.values[b]) for m, f in forecasts.items()},
                combined=float(combined.values[b]),
                ssm=list(ss.survivors),
                weights=dict(ss.weights),
                lag_diff=try_lag_diff(self.prices, start.advance(b)),
                fallback=ss.fallback,
            ))
        return records

    @staticmethod
    def _selections(day: dt.date, sets: List[SuperiorSet]) -> List[SsmReportRow]:
        rows = []
        for b, ss in enumerate(sets, start=1):
            steps = {m: k for k, m in enumerate(ss.elimination_order, start=1)}
            for model in sorted(ss.pvalues):
                rows.append(SsmReportRow(
                    date=day,
                    block=b,
                    model=model,
                    mcs_pvalue=ss.pvalues[model],
                    mean_loss=ss.mean_losses.get(model),
                    weight=ss.weights.get(model, 0.0),
                    eliminated_at=steps.get(model),
                ))
        return rows


def load_market_data(plan: BacktestPlan) -> Tuple[PriceSeries, Optional[DriverMatrix]]:
    """Read the price and (optional) driver files a plan names.

    Raises:
        PlanError: if a named file cannot be opened
    """
    try:
        prices = load_price_file(plan.prices_csv)
        drivers = load_driver_file(plan.drivers_csv) if plan.drivers_csv is not None else None
    except OSError as exc:
        raise PlanError(f"cannot read {exc.filename}: {exc.strerror}") from None
    return prices, drivers


def run_backtest(
    plan: BacktestPlan,
    prices: Optional[PriceSeries] = None,
    drivers: Optional[DriverMatrix] = None,
    registry: Optional[ModelRegistry] = None,
    jobs: Optional[int] = None,
    progress: Optional[ProgressCallback] = None,
) -> BacktestResult:
    """Convenience function to run a plan, loading its files unless data is given."""
    if prices is None:
        prices, drivers = load_market_data(plan)
    return BacktestEngine(plan, prices, drivers, registry, jobs).run(progress)


def forecast_day(
    plan: BacktestPlan,
    day: dt.date,
    prices: Optional[PriceSeries] = None,
    drivers: Optional[DriverMatrix] = None,
    registry: Optional[ModelRegistry] = None,
    jobs: Optional[int] = None,
) -> DayForecast:
    """Convenience function for a single-day combined forecast."""
    if prices is None:
        prices, drivers = load_market_data(plan)
    return BacktestEngine(plan, prices, drivers, registry, jobs).forecast_day(day)
