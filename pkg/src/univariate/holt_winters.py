"""Additive Holt-Winters exponential smoothing (HW_1), optional second seasonality."""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize
from scipy.signal import lfilter, lfiltic

from src.errors import FitError, InsufficientHistoryError
from src.models import BLOCKS_PER_DAY, BlockTimestamp, ModelForecast, PriceSeries

logger = logging.getLogger(__name__)

BAD_OBJECTIVE = 1e300


class HwConfig(BaseModel):
    """Holt-Winters settings."""
    model_config = ConfigDict(extra="forbid")

    period: int = Field(BLOCKS_PER_DAY, ge=2)
    second_period: Optional[int] = Field(None, description="Weekly period 672 enables double seasonality")
    max_iter: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _check_periods(self) -> "HwConfig":
        if self.second_period is not None and self.second_period % self.period:
            raise ValueError("second_period must be a multiple of period")
        return self


class HwModel(BaseModel):
    """Fitted additive Holt-Winters state.

    `seasonal[j]` is the component for the (j+1)-th block after `origin`.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    level: float
    trend: float
    seasonal: np.ndarray
    seasonal2: Optional[np.ndarray] = None
    alpha: float = Field(..., ge=0.0, le=1.0)
    beta: float = Field(..., ge=0.0, le=1.0)
    gamma: float = Field(..., ge=0.0, le=1.0)
    gamma2: Optional[float] = Field(None, ge=0.0, le=1.0)
    origin: BlockTimestamp = Field(..., description="Last training timestamp")
    scale: float = Field(1.0, gt=0.0)
    sse: float = 0.0

    @model_validator(mode="after")
    def _check_invariants(self) -> "HwModel":
        for component in (self.seasonal, self.seasonal2):
            if component is None:
                continue
            if abs(component.sum()) >= 1e-6 * component.size * self.scale:
                raise ValueError("seasonal components must sum to ~0 per cycle")
        return self

    @property
    def period(self) -> int:
        return int(self.seasonal.size)


def _initial_state(y: np.ndarray, m: int, m2: Optional[int]) -> Tuple[float, float, np.ndarray, Optional[np.ndarray]]:
    """Decomposition averages over the first two cycles of the longest period."""
    cycle = m2 or m
    first, second = y[:cycle].mean(), y[cycle:2 * cycle].mean()
    trend = (second - first) / cycle
    level = first - trend * (cycle + 1) / 2.0
    t = np.arange(1, 2 * cycle + 1)
    detrended = y[: 2 * cycle] - (level + trend * t)
    s1 = detrended.reshape(-1, m).mean(axis=0)
    s1 -= s1.mean()
    if m2 is None:
        return level, trend, s1, None
    rest = detrended - np.tile(s1, 2 * cycle // m)
    s2 = rest.reshape(-1, m2).mean(axis=0)
    s2 -= s2.mean()
    return level, trend, s1, s2


def _run(
    y: np.ndarray,
    params: np.ndarray,
    state: Tuple[float, float, np.ndarray, Optional[np.ndarray]],
    normalize: bool,
) -> Tuple[np.ndarray, float, float, np.ndarray, Optional[np.ndarray]]:
    """Error-correction recursion; returns one-step errors and the final state."""
    alpha, beta, gamma = params[:3]
    gamma2 = params[3] if len(params) > 3 else 0.0
    level, trend, s1, s2 = state
    s1 = s1.copy()
    s2 = None if s2 is None else s2.copy()
    m, m2 = s1.size, (None if s2 is None else s2.size)
    errors = np.empty(y.size)
    for t in range(y.size):
        i1 = t % m
        fitted = level + trend + s1[i1]
        if s2 is not None:
            i2 = t % m2
            fitted += s2[i2]
        e = y[t] - fitted
        errors[t] = e
        level = level + trend + alpha * e
        trend = trend + alpha * beta * e
        delta = gamma * (1.0 - alpha) * e
        s1[i1] += delta
        if normalize:
            s1 -= delta / m
            level += delta / m
        if s2 is not None:
            delta2 = gamma2 * (1.0 - alpha) * e
            s2[i2] += delta2
            if normalize:
                s2 -= delta2 / m2
                level += delta2 / m2
    return errors, level, trend, s1, s2


def _arima_filter(alpha: float, beta: float, gamma: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Equivalent ARIMA form: (1-B)(1-B^m) y_t = theta(B) e_t."""
    diff = np.zeros(m + 2)
    diff[[0, 1, m, m + 1]] = [1.0, -1.0, -1.0, 1.0]
    theta = diff.copy()
    theta[1] += alpha + alpha * beta
    theta[2:m + 2] += alpha * beta
    theta[m] += gamma * (1.0 - alpha)
    theta[m + 1] += -alpha - alpha * beta - gamma * (1.0 - alpha)
    return diff, theta


def one_step_errors(y: np.ndarray, params: np.ndarray, state, fast: bool = True) -> np.ndarray:
    """One-step-ahead errors; the single-seasonal case switches to a linear filter after warm-up."""
    _, _, s1, s2 = state
    m = s1.size
    warm = 2 * m
    if not fast or s2 is not None or y.size <= warm + m + 2:
        return _run(y, params, state, normalize=False)[0]
    head = _run(y[:warm], params, state, normalize=False)[0]
    diff, theta = _arima_filter(params[0], params[1], params[2], m)
    order = m + 1
    zi = lfiltic(diff, theta, head[-order:][::-1], y[warm - order:warm][::-1])
    tail, _ = lfilter(diff, theta, y[warm:], zi=zi)
    return np.concatenate([head, tail])


class HoltWintersForecaster:
    """Fits and forecasts additive Holt-Winters models."""

    STARTS = [(a, b, g) for a in (0.1, 0.5, 0.9) for b in (0.01, 0.1) for g in (0.05, 0.3)]

    def __init__(self, config: Optional[HwConfig] = None):
        self.config = config or HwConfig()

    def fit(self, train: PriceSeries) -> HwModel:
        """Choose smoothing parameters by bounded minimization of one-step SSE.

        Args:
            train: Training window, at least two full cycles, no missing entries

        Returns:
            Fitted HwModel aligned to the end of `train`
        """
        m, m2 = self.config.period, self.config.second_period
        cycle = m2 or m
        if len(train) < 2 * cycle:
            raise InsufficientHistoryError(f"Holt-Winters needs two full cycles ({2 * cycle} blocks), got {len(train)}")
        if train.has_missing:
            raise FitError("Holt-Winters training window has missing entries")

        y = np.asarray(train.values, dtype=float)
        state = _initial_state(y, m, m2)
        n_params = 3 if m2 is None else 4

        def objective(params: np.ndarray) -> float:
            errors = one_step_errors(y, params, state)
            sse = float(errors @ errors) / y.size
            return sse if np.isfinite(sse) else BAD_OBJECTIVE

        starts = [np.array(s + (0.05,) * (n_params - 3)) for s in self.STARTS]
        x0 = min(starts, key=objective)
        result = minimize(
            objective,
            x0,
            method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * n_params,
            options={"maxiter": self.config.max_iter},
        )
        params = np.clip(result.x, 0.0, 1.0)
        if objective(params) > objective(x0):
            params = x0
        errors, level, trend, s1, s2 = _run(y, params, state, normalize=True)
        sse = float(errors @ errors)
        if not np.isfinite(sse):
            raise FitError("Holt-Winters recursion diverged")

        n = y.size
        logger.info("HW fitted alpha=%.4f beta=%.4f gamma=%.4f sse=%.6g", params[0], params[1], params[2], sse)
        return HwModel(
            level=level,
            trend=trend,
            seasonal=np.roll(s1, -(n % m)),
            seasonal2=None if s2 is None else np.roll(s2, -(n % m2)),
            alpha=float(params[0]),
            beta=float(params[1]),
            gamma=float(params[2]),
            gamma2=None if m2 is None else float(params[3]),
            origin=train.end,
            scale=max(float(np.mean(np.abs(y))), 1.0),
            sse=sse,
        )

    def forecast(self, model: HwModel, horizon: int = BLOCKS_PER_DAY, name: str = "HW_1") -> ModelForecast:
        """ŷ_{t+k} = level + k·trend + seasonal terms, floored at 0."""
        k = np.arange(1, horizon + 1)
        values = model.level + k * model.trend + model.seasonal[(k - 1) % model.period]
        if model.seasonal2 is not None:
            values = values + model.seasonal2[(k - 1) % model.seasonal2.size]
        return ModelForecast(model=name, date=model.origin.successor().date, values=np.maximum(values, 0.0))


def fit_holt_winters(train: PriceSeries, config: Optional[HwConfig] = None) -> HwModel:
    """Convenience function to fit HW_1."""
    return HoltWintersForecaster(config).fit(train)


def forecast_hw(model: HwModel, horizon: int = BLOCKS_PER_DAY, name: str = "HW_1") -> ModelForecast:
    """Convenience function for Holt-Winters forecasts."""
    return HoltWintersForecaster().forecast(model, horizon, name)
