"""Per-family fit-and-forecast adapters used by the backtest loop."""

import datetime as dt
import logging
from typing import Any, Dict, Optional

import numpy as np

from src.backtest.registry import FEATURE_KEYS, needs_drivers
from src.boosting.gbm import GbmConfig, fit_gbm, predict_gbm
from src.errors import FitError, WindowError
from src.features.pipeline import DriverPipeline
from src.kernel_ml.ann import AnnConfig, fit_ann, predict_ann
from src.kernel_ml.features import DesignMatrix, FeatureBuilder
from src.kernel_ml.svr import SvrConfig, fit_svr, predict_svr
from src.models import (
    BlockTimestamp,
    DriverMatrix,
    FeatureRecipe,
    ModelFamily,
    ModelForecast,
    ModelSpec,
    PriceSeries,
)
from src.series.windows import driver_window, window
from src.univariate.arfima import ArfimaConfig, fit_arfima, forecast_arfima
from src.univariate.arma_garch import AgConfig, fit_arma_garch, forecast_arma_garch
from src.univariate.holt_winters import HwConfig, fit_holt_winters, forecast_hw
from src.univariate.sarimax import EXOG_COLUMN, fit_forecast_sarimax

logger = logging.getLogger(__name__)


def estimator_params(spec: ModelSpec) -> Dict[str, Any]:
    return {k: v for k, v in spec.params.items() if k not in FEATURE_KEYS}


def required_price_days(spec: ModelSpec) -> int:
    """Full days of prices a spec needs before its first forecast day."""
    # SARIMAX also needs the day before its window for the lagged regressor
    return spec.window_days + (1 if spec.family == ModelFamily.SARIMAX else 0)


def required_driver_days(spec: ModelSpec, screen_days: int) -> int:
    if spec.recipe == FeatureRecipe.PCA:
        return max(screen_days, spec.window_days)
    if spec.family == ModelFamily.SARIMAX:
        return spec.window_days + 1
    return spec.window_days if spec.uses_ds_gap else 0


class ModelRunner:
    """Fits one registry spec on its window ending D-1 and forecasts day D."""

    def __init__(self, pipeline: Optional[DriverPipeline] = None, seed: int = 0):
        self.pipeline = pipeline or DriverPipeline()
        self.seed = seed

    def forecast(
        self,
        spec: ModelSpec,
        prices: PriceSeries,
        drivers: Optional[DriverMatrix],
        day: dt.date,
    ) -> ModelForecast:
        """96-block forecast of `day` from data up to the last block of the day before.

        Raises:
            WindowError: if the window or the drivers it needs are unavailable
            FitError: if the estimator fails
        """
        end = BlockTimestamp.last_of(day - dt.timedelta(days=1))
        if needs_drivers(spec) and drivers is None:
            raise WindowError(f"{spec.name} needs a driver file")
        train = window(prices, end, spec.window_days)
        handler = getattr(self, f"_{spec.family.value}")
        forecast = handler(spec, train, drivers, end)
        if forecast.date != day:
            raise FitError(f"{spec.name} forecast {forecast.date} instead of {day}")
        return forecast

    def _arfima(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        model = fit_arfima(train, config=ArfimaConfig(**estimator_params(spec)))
        return forecast_arfima(model, train, name=spec.name)

    def _holt_winters(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        model = fit_holt_winters(train, HwConfig(**estimator_params(spec)))
        return forecast_hw(model, name=spec.name)

    def _arma_garch(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        model = fit_arma_garch(train, AgConfig(**estimator_params(spec)))
        return forecast_arma_garch(model, train, name=spec.name)

    def _sarimax(self, spec: ModelSpec, train: PriceSeries, drivers: DriverMatrix, end) -> ModelForecast:
        return fit_forecast_sarimax(train, drivers, name=spec.name)

    def _ann(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        design = self.design(spec, train, drivers, end)
        model = fit_ann(design, AnnConfig(**{"seed": self.seed, **estimator_params(spec)}))
        return self._wrap(spec, design, predict_ann(model, design.query))

    def _svr(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        design = self.design(spec, train, drivers, end)
        model = fit_svr(design, SvrConfig(**estimator_params(spec)))
        if not model.converged:
            logger.warning("%s: SMO stopped at max_iter with KKT gap %.3g", spec.name, model.kkt_gap)
        return self._wrap(spec, design, predict_svr(model, design.query))

    def _gbm(self, spec: ModelSpec, train: PriceSeries, drivers, end) -> ModelForecast:
        design = self.design(spec, train, drivers, end)
        # trees fit the raw targets on standardized features
        model = fit_gbm(design.rows, design.targets, GbmConfig(**estimator_params(spec)))
        return self._wrap(spec, design, predict_gbm(model, design.query))

    def design(
        self,
        spec: ModelSpec,
        train: PriceSeries,
        drivers: Optional[DriverMatrix],
        end: BlockTimestamp,
    ) -> DesignMatrix:
        """Feature matrix of a kernel or tree spec, including the query rows of the next day."""
        recipe = spec.recipe or FeatureRecipe.NODS
        options = {k: spec.params[k] for k in FEATURE_KEYS if k in spec.params}
        builder = FeatureBuilder(recipe, include_ds_gap=spec.uses_ds_gap, **options)
        ds_gap = factors = None
        if spec.uses_ds_gap:
            gap_window = driver_window(drivers, end, spec.window_days)
            if EXOG_COLUMN not in gap_window.columns:
                raise WindowError(f"{spec.name} needs a '{EXOG_COLUMN}' driver column")
            ds_gap = gap_window.column(EXOG_COLUMN)
        if recipe == FeatureRecipe.PCA:
            factors = self.pipeline.factors(
                drivers, end, spec.window_days, spec.uses_ipp, exclude=[EXOG_COLUMN]
            ).scores
        return builder.build(train, ds_gap=ds_gap, factors=factors)

    @staticmethod
    def _wrap(spec: ModelSpec, design: DesignMatrix, values: np.ndarray) -> ModelForecast:
        return ModelForecast(model=spec.name, date=design.query_date, values=values)


def run_model(
    spec: ModelSpec,
    prices: PriceSeries,
    drivers: Optional[DriverMatrix],
    day: dt.date,
    seed: int = 0,
) -> ModelForecast:
    """Convenience function for a single fit-and-forecast."""
    return ModelRunner(seed=seed).forecast(spec, prices, drivers, day)
