"""Regression on the previous day's demand-supply gap with seasonal ARMA errors."""

import logging
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import FitError, WindowError
from src.models import BLOCKS_PER_DAY, DriverMatrix, ModelForecast, PriceSeries
from src.univariate.arma import arma_forecast, fit_css, is_stable

logger = logging.getLogger(__name__)

EXOG_COLUMN = "ds_gap"
EXOG_LAG = BLOCKS_PER_DAY


class SarimaxModel(BaseModel):
    """(1,0,1)x(1,0,0)@96 errors around an OLS fit on the lagged gap."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    order: Tuple[int, int, int] = (1, 0, 1)
    seasonal_order: Tuple[int, int, int] = (1, 0, 0)
    period: int = BLOCKS_PER_DAY
    phi: float
    theta: float
    seasonal_phi: float
    intercept: float
    beta_x: float
    sigma2: float = Field(..., ge=0.0)

    @property
    def ar(self) -> np.ndarray:
        seasonal = np.zeros(self.period + 1)
        seasonal[0], seasonal[-1] = 1.0, -self.seasonal_phi
        return np.convolve([1.0, -self.phi], seasonal)

    @property
    def ma(self) -> np.ndarray:
        return np.array([1.0, self.theta])

    @model_validator(mode="after")
    def _check_invariants(self) -> "SarimaxModel":
        if not (is_stable(np.array([1.0, -self.phi])) and abs(self.seasonal_phi) < 1.0):
            raise ValueError("AR polynomials must be stationary")
        if not is_stable(self.ma):
            raise ValueError("MA polynomial must be invertible")
        return self


def _builder(period: int):
    def build(params: np.ndarray):
        phi, theta, seasonal_phi = params
        seasonal = np.zeros(period + 1)
        seasonal[0], seasonal[-1] = 1.0, -seasonal_phi
        return np.convolve([1.0, -phi], seasonal), np.array([1.0, theta])
    return build


class SarimaxForecaster:
    """Fits the regression-with-ARMA-errors model and forecasts one day."""

    def lagged_exog(self, train: PriceSeries, exog: DriverMatrix) -> Tuple[np.ndarray, np.ndarray]:
        """Regressor over the training window and over the next 96 blocks.

        The driver row at t carries the gap known at t for delivery t + 96.
        """
        try:
            gap = exog.column(EXOG_COLUMN)
        except KeyError as exc:
            raise WindowError(str(exc)) from None
        first = exog.position(train.start) - EXOG_LAG
        last = exog.position(train.end)
        if first < 0 or last >= len(exog):
            raise WindowError(
                f"{EXOG_COLUMN} must cover {train.start.advance(-EXOG_LAG)}..{train.end}, "
                f"drivers span {exog.start}..{exog.end}"
            )
        x_train = gap[first:first + len(train)]
        x_future = gap[last + 1 - EXOG_LAG:last + 1]
        return np.asarray(x_train, dtype=float), np.asarray(x_future, dtype=float)

    def fit(self, train: PriceSeries, exog: DriverMatrix) -> Tuple[SarimaxModel, np.ndarray]:
        """Returns the model and the regressor for the forecast day."""
        if train.has_missing:
            raise FitError("SARIMAX training window has missing entries")
        if len(train) <= 2 * BLOCKS_PER_DAY:
            raise FitError("SARIMAX needs more than two days of training data")
        y = np.asarray(train.values, dtype=float)
        x_train, x_future = self.lagged_exog(train, exog)

        if np.var(x_train) == 0.0:
            logger.warning("%s has zero variance over the window; regression coefficient fixed at 0", EXOG_COLUMN)
            intercept, beta_x = float(y.mean()), 0.0
        else:
            design = np.column_stack([np.ones_like(x_train), x_train])
            coefs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
            if rank < 2:
                raise FitError("singular regression on the exogenous gap")
            intercept, beta_x = float(coefs[0]), float(coefs[1])

        u = y - intercept - beta_x * x_train
        if np.var(u) == 0.0:
            fit_params, sse = np.zeros(3), 0.0
        else:
            arma = fit_css(u, 3, _builder(BLOCKS_PER_DAY))
            if arma is None:
                raise FitError("seasonal ARMA errors are not stationary and invertible")
            fit_params, sse = arma.params, arma.sse
        model = SarimaxModel(
            phi=float(fit_params[0]),
            theta=float(fit_params[1]),
            seasonal_phi=float(fit_params[2]),
            intercept=intercept,
            beta_x=beta_x,
            sigma2=sse / u.size,
        )
        return model, x_future

    def fit_forecast(self, train: PriceSeries, exog: DriverMatrix, name: str = "SARIMAX") -> ModelForecast:
        model, x_future = self.fit(train, exog)
        x_train, _ = self.lagged_exog(train, exog)
        u = np.asarray(train.values, dtype=float) - model.intercept - model.beta_x * x_train
        residual_future = arma_forecast(u, model.ar, model.ma, BLOCKS_PER_DAY)
        values = model.intercept + model.beta_x * x_future + residual_future
        if not np.all(np.isfinite(values)):
            raise FitError("SARIMAX forecast is not finite")
        return ModelForecast(model=name, date=train.end.successor().date, values=np.maximum(values, 0.0))


def fit_forecast_sarimax(train: PriceSeries, exog: DriverMatrix, name: str = "SARIMAX") -> ModelForecast:
    """Convenience function: fit on `train` and forecast the following 96 blocks."""
    return SarimaxForecaster().fit_forecast(train, exog, name)
