"""Long-memory ARFIMA(p, d, q) fitted by grid search over d with CSS ARMA fits."""

import datetime as dt
import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import DegenerateInputError, FitError, InsufficientHistoryError, WindowError
from src.models import BLOCKS_PER_DAY, ModelForecast, PriceSeries
from src.series.windows import years_to_days
from src.univariate.arma import (
    ar_polynomial,
    aicc,
    arma_forecast,
    candidate_orders,
    fit_css,
    is_stable,
    ma_polynomial,
    plain_orders,
)

logger = logging.getLogger(__name__)

ARFIMA_WINDOWS: Dict[str, int] = {
    "ARFIMA1": years_to_days(3.5),
    "ARFIMA2": years_to_days(1.5),
}


class ArfimaConfig(BaseModel):
    """Estimator settings for ARFIMA."""
    model_config = ConfigDict(extra="forbid")

    d_min: float = Field(-0.49, gt=-0.5)
    d_max: float = Field(0.49, lt=0.5)
    d_step: float = Field(0.01, gt=0.0)
    max_p: int = Field(3, ge=0)
    max_q: int = Field(3, ge=0)
    truncation: int = Field(100, ge=50, description="Fractional filter length")

    def d_grid(self) -> np.ndarray:
        lo = int(round(self.d_min / self.d_step))
        hi = int(round(self.d_max / self.d_step))
        return np.round(np.arange(lo, hi + 1) * self.d_step, 10)


class ArfimaModel(BaseModel):
    """Fitted ARFIMA model."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d: float = Field(..., gt=-0.5, lt=0.5)
    p: int = Field(..., ge=0)
    q: int = Field(..., ge=0)
    phi: np.ndarray
    theta: np.ndarray
    mu: float
    sigma2: float = Field(..., gt=0.0)
    truncation: int = Field(..., ge=50)
    css: float = 0.0
    d_grid: Optional[np.ndarray] = Field(None, description="Grid searched for d")
    css_profile: Optional[np.ndarray] = Field(None, description="CSS per grid point for the chosen orders")

    @model_validator(mode="after")
    def _check_invariants(self) -> "ArfimaModel":
        if self.phi.size != self.p or self.theta.size != self.q:
            raise ValueError("coefficient vectors must match orders")
        if not is_stable(ar_polynomial(self.phi)):
            raise ValueError("AR polynomial has a root inside the unit circle")
        if not is_stable(ma_polynomial(self.theta)):
            raise ValueError("MA polynomial has a root inside the unit circle")
        return self


def frac_diff_weights(d: float, truncation: int) -> np.ndarray:
    """pi_0 = 1, pi_k = pi_{k-1} (k - 1 - d) / k for k = 1..truncation."""
    k = np.arange(1, truncation + 1, dtype=float)
    return np.r_[1.0, np.cumprod((k - 1.0 - d) / k)]


def frac_diff(x: np.ndarray, d: float, truncation: int) -> np.ndarray:
    """Apply the truncated fractional difference (1 - B)^d.

    Raises:
        ValueError: for non-finite input or truncation < 1
    """
    x = np.asarray(x, dtype=float)
    if truncation < 1:
        raise ValueError("truncation must be at least 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("frac_diff input must be finite")
    weights = frac_diff_weights(d, min(truncation, max(x.size - 1, 0)))
    return np.convolve(x, weights)[: x.size]


class ArfimaEstimator:
    """Grid-search CSS estimator for ARFIMA."""

    MIN_SAMPLES = 100

    def __init__(self, config: Optional[ArfimaConfig] = None):
        self.config = config or ArfimaConfig()

    def fit(self, train: PriceSeries, variant: Optional[str] = None) -> ArfimaModel:
        """Fit an ARFIMA model.

        Args:
            train: Training window without missing entries
            variant: ARFIMA1 or ARFIMA2 to enforce the matching window length

        Returns:
            Fitted ArfimaModel
        """
        if variant is not None:
            if variant not in ARFIMA_WINDOWS:
                raise ValueError(f"unknown ARFIMA variant '{variant}'")
            expected = ARFIMA_WINDOWS[variant] * BLOCKS_PER_DAY
            if len(train) < expected:
                raise InsufficientHistoryError(f"{variant} needs {expected} blocks, got {len(train)}")
            if len(train) != expected:
                raise WindowError(f"{variant} window must be exactly {expected} blocks, got {len(train)}")
        if train.has_missing:
            raise FitError("ARFIMA training window has missing entries")
        if len(train) < self.MIN_SAMPLES:
            raise InsufficientHistoryError(f"ARFIMA needs at least {self.MIN_SAMPLES} samples, got {len(train)}")

        x = np.asarray(train.values, dtype=float)
        if np.var(x) == 0.0:
            raise DegenerateInputError("constant training window")
        mu = float(x.mean())
        z = x - mu
        grid = self.config.d_grid()
        orders = candidate_orders(self.config.max_p, self.config.max_q)

        css = {order: np.full(grid.size, np.inf) for order in orders}
        params: Dict[Tuple[int, int], Dict[int, np.ndarray]] = {order: {} for order in orders}
        warm: Dict[Tuple[int, int], np.ndarray] = {}
        for i, d in enumerate(grid):
            w = frac_diff(z, float(d), self.config.truncation)
            for p, q in orders:
                fit = fit_css(w, p + q, plain_orders(p, q), x0=warm.get((p, q)))
                if fit is None:
                    continue
                css[(p, q)][i] = fit.sse
                params[(p, q)][i] = fit.params
                warm[(p, q)] = fit.params

        best: Optional[Tuple[float, Tuple[int, int], int]] = None
        for order in orders:
            profile = css[order]
            if not np.isfinite(profile).any():
                continue
            i = int(np.argmin(profile))
            score = aicc(float(profile[i]), z.size, order[0] + order[1] + 2)
            if best is None or score < best[0]:
                best = (score, order, i)
        if best is None:
            raise FitError("ARMA fit non-invertible at every grid point")

        _, (p, q), i = best
        coefs = params[(p, q)][i]
        sse = float(css[(p, q)][i])
        logger.info("ARFIMA selected d=%.2f p=%d q=%d css=%.6g", grid[i], p, q, sse)
        return ArfimaModel(
            d=float(grid[i]),
            p=p,
            q=q,
            phi=coefs[:p],
            theta=coefs[p:p + q],
            mu=mu,
            sigma2=max(sse / z.size, np.finfo(float).tiny),
            truncation=self.config.truncation,
            css=sse,
            d_grid=grid,
            css_profile=css[(p, q)].copy(),
        )

    def forecast(
        self,
        model: ArfimaModel,
        history: PriceSeries,
        horizon: int = BLOCKS_PER_DAY,
        name: str = "ARFIMA",
        date: Optional[dt.date] = None,
    ) -> ModelForecast:
        """Day-ahead forecast from the end of `history`."""
        if len(history) < model.truncation:
            raise InsufficientHistoryError(
                f"forecast needs at least {model.truncation} history entries, got {len(history)}"
            )
        if history.has_missing:
            raise FitError("ARFIMA forecast history has missing entries")
        z = np.asarray(history.values, dtype=float) - model.mu
        n = z.size
        w = frac_diff(z, model.d, model.truncation)
        w_future = arma_forecast(w, ar_polynomial(model.phi), ma_polynomial(model.theta), horizon)

        pi = frac_diff_weights(model.d, model.truncation)[1:]
        z_ext = np.concatenate([z, np.zeros(horizon)])
        for k in range(horizon):
            t = n + k
            z_ext[t] = w_future[k] - pi @ z_ext[t - model.truncation:t][::-1]
        values = np.maximum(model.mu + z_ext[n:], 0.0)
        if not np.all(np.isfinite(values)):
            raise FitError("ARFIMA forecast is not finite")
        return ModelForecast(model=name, date=date or history.end.date + dt.timedelta(days=1), values=values)


def fit_arfima(train: PriceSeries, variant: Optional[str] = None, config: Optional[ArfimaConfig] = None) -> ArfimaModel:
    """Convenience function to fit ARFIMA."""
    return ArfimaEstimator(config).fit(train, variant)


def forecast_arfima(model: ArfimaModel, history: PriceSeries, horizon: int = BLOCKS_PER_DAY, name: str = "ARFIMA") -> ModelForecast:
    """Convenience function for ARFIMA forecasts."""
    return ArfimaEstimator().forecast(model, history, horizon, name)
