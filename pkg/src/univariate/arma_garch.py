"""ARMA mean with GARCH(1,1) errors (model `ag`)."""

import datetime as dt
import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.stats import chi2

from src.errors import DegenerateInputError, FitError, InsufficientHistoryError
from src.models import BLOCKS_PER_DAY, ModelForecast, PriceSeries
from src.series.windows import years_to_days
from src.univariate.arma import ar_polynomial, arma_forecast, arma_residuals, ma_polynomial, select_arma

logger = logging.getLogger(__name__)

AG_WINDOW_DAYS = years_to_days(3.5)
PERSISTENCE_CAP = 0.999
BARRIER = 1e12


class AgConfig(BaseModel):
    """ARMA-GARCH settings."""
    model_config = ConfigDict(extra="forbid")

    max_p: int = Field(2, ge=0)
    max_q: int = Field(2, ge=0)
    xatol: float = 1e-8
    fatol: float = 1e-8
    max_iter: int = Field(2000, ge=1)
    lr_level: float = Field(0.01, gt=0.0, lt=1.0, description="Size of the test against constant variance")


class GarchFit(BaseModel):
    """GARCH(1,1) parameters on a residual series."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    omega: float
    alpha1: float
    beta1: float
    h: np.ndarray
    loglik: float
    homoskedastic: bool = False


class AgModel(BaseModel):
    """Fitted ARMA-GARCH(1,1)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: int = Field(..., ge=0)
    q: int = Field(..., ge=0)
    phi: np.ndarray
    theta: np.ndarray
    mu: float
    omega: float = Field(..., gt=0.0)
    alpha1: float = Field(..., ge=0.0)
    beta1: float = Field(..., ge=0.0)
    h: np.ndarray = Field(..., description="Conditional variances over the training window")
    homoskedastic: bool = False
    loglik: float = 0.0

    @model_validator(mode="after")
    def _check_invariants(self) -> "AgModel":
        if self.alpha1 + self.beta1 >= 1.0:
            raise ValueError("GARCH persistence alpha1 + beta1 must be < 1")
        if self.h.size and not np.all(self.h > 0):
            raise ValueError("conditional variances must be positive")
        return self

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha1 - self.beta1)


def garch_variances(e: np.ndarray, omega: float, alpha1: float, beta1: float, h0: float) -> np.ndarray:
    """h_0 = h0, h_t = omega + alpha1 e_{t-1}^2 + beta1 h_{t-1}."""
    h = np.empty(e.size)
    h[0] = h0
    if e.size > 1:
        drive = omega + alpha1 * e[:-1] ** 2
        h[1:], _ = lfilter([1.0], [1.0, -beta1], drive, zi=[beta1 * h0])
    return h


def gaussian_loglik(e: np.ndarray, h: np.ndarray) -> float:
    return float(-0.5 * np.sum(np.log(2.0 * np.pi) + np.log(h) + e ** 2 / h))


def fit_garch11(e: np.ndarray, config: Optional[AgConfig] = None) -> GarchFit:
    """Gaussian QMLE of GARCH(1,1) by Nelder-Mead from several starts.

    Falls back to constant variance when the GARCH terms fail a likelihood-ratio
    test at `config.lr_level`.
    """
    config = config or AgConfig()
    e = np.asarray(e, dtype=float)
    var = float(np.var(e))
    if not np.isfinite(var) or var <= 0.0:
        raise DegenerateInputError("residual variance is zero or non-finite")
    u = e / np.sqrt(var)

    def nll(params: np.ndarray) -> float:
        omega, alpha1, beta1 = params
        if omega <= 0.0 or alpha1 < 0.0 or beta1 < 0.0:
            return BARRIER
        if alpha1 + beta1 > PERSISTENCE_CAP:
            return BARRIER + (alpha1 + beta1)
        h = garch_variances(u, omega, alpha1, beta1, 1.0)
        if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
            return BARRIER
        value = -gaussian_loglik(u, h)
        return value if np.isfinite(value) else BARRIER

    options = {"xatol": config.xatol, "fatol": config.fatol, "maxiter": config.max_iter}
    starts: List[Tuple[float, float]] = [(0.05, 0.90), (0.10, 0.80), (0.20, 0.50), (0.05, 0.50)]
    best = None
    for a, b in starts:
        result = minimize(nll, np.array([1.0 - a - b, a, b]), method="Nelder-Mead", options=options)
        if result.fun < BARRIER and (best is None or result.fun < best.fun):
            best = result
    if best is None:
        raise FitError("GARCH likelihood non-finite at every start")
    perturbed = best.x * np.array([1.1, 0.9, 0.95])
    retry = minimize(nll, perturbed, method="Nelder-Mead", options=options)
    if retry.fun < best.fun:
        best = retry

    omega, alpha1, beta1 = (float(v) for v in best.x)
    h = garch_variances(u, omega, alpha1, beta1, 1.0)
    loglik = gaussian_loglik(u, h)
    loglik_const = gaussian_loglik(u, np.ones(u.size))
    statistic = 2.0 * (loglik - loglik_const)
    offset = -0.5 * u.size * np.log(var)
    if statistic < chi2.ppf(1.0 - config.lr_level, 2):
        logger.info("GARCH terms insignificant (LR=%.3f); using constant variance", statistic)
        return GarchFit(
            omega=var, alpha1=0.0, beta1=0.0, h=np.full(e.size, var),
            loglik=loglik_const + offset, homoskedastic=True,
        )

    if not (alpha1 + beta1 < 1.0 and np.all(h > 0.0)):
        raise FitError("GARCH fit violates covariance stationarity")
    return GarchFit(omega=omega * var, alpha1=alpha1, beta1=beta1, h=h * var, loglik=loglik + offset)


class ArmaGarchForecaster:
    """ARMA orders by AICc, then GARCH(1,1) on the ARMA residuals."""

    MIN_SAMPLES = 100

    def __init__(self, config: Optional[AgConfig] = None):
        self.config = config or AgConfig()

    def fit(self, train: PriceSeries) -> AgModel:
        if train.has_missing:
            raise FitError("ARMA-GARCH training window has missing entries")
        if len(train) < self.MIN_SAMPLES:
            raise InsufficientHistoryError(f"ARMA-GARCH needs at least {self.MIN_SAMPLES} samples, got {len(train)}")
        x = np.asarray(train.values, dtype=float)
        if np.var(x) == 0.0:
            raise DegenerateInputError("constant training window")
        mu = float(x.mean())
        z = x - mu
        try:
            (p, q), arma = select_arma(z, self.config.max_p, self.config.max_q)
        except ValueError as exc:
            raise FitError(str(exc)) from None
        e = arma_residuals(z, arma.ar, arma.ma)
        garch = fit_garch11(e, self.config)
        model = AgModel(
            p=p,
            q=q,
            phi=arma.params[:p],
            theta=arma.params[p:p + q],
            mu=mu,
            omega=garch.omega,
            alpha1=garch.alpha1,
            beta1=garch.beta1,
            h=garch.h,
            homoskedastic=garch.homoskedastic,
            loglik=garch.loglik,
        )
        logger.info(
            "ag fitted ARMA(%d,%d) omega=%.4g alpha1=%.4f beta1=%.4f", p, q, model.omega, model.alpha1, model.beta1
        )
        return model

    def forecast(
        self,
        model: AgModel,
        history: PriceSeries,
        horizon: int = BLOCKS_PER_DAY,
        name: str = "ag",
        date: Optional[dt.date] = None,
    ) -> ModelForecast:
        """Mean from the ARMA recursion, variance from the GARCH recursion."""
        if history.has_missing:
            raise FitError("ARMA-GARCH forecast history has missing entries")
        if len(history) < max(model.p, model.q, 1):
            raise InsufficientHistoryError("history shorter than the ARMA order")
        ar, ma = ar_polynomial(model.phi), ma_polynomial(model.theta)
        z = np.asarray(history.values, dtype=float) - model.mu
        mean = np.maximum(model.mu + arma_forecast(z, ar, ma, horizon), 0.0)

        e = arma_residuals(z, ar, ma)
        h = garch_variances(e, model.omega, model.alpha1, model.beta1, model.unconditional_variance)
        persistence = model.alpha1 + model.beta1
        variance = np.empty(horizon)
        variance[0] = model.omega + model.alpha1 * e[-1] ** 2 + model.beta1 * h[-1]
        for k in range(1, horizon):
            variance[k] = model.omega + persistence * variance[k - 1]
        if not np.all(np.isfinite(mean)):
            raise FitError("ARMA-GARCH forecast is not finite")
        return ModelForecast(
            model=name, date=date or history.end.date + dt.timedelta(days=1), values=mean, variance=variance
        )


def fit_arma_garch(train: PriceSeries, config: Optional[AgConfig] = None) -> AgModel:
    """Convenience function to fit `ag`."""
    return ArmaGarchForecaster(config).fit(train)


def forecast_arma_garch(model: AgModel, history: PriceSeries, horizon: int = BLOCKS_PER_DAY, name: str = "ag") -> ModelForecast:
    """Convenience function for ARMA-GARCH forecasts."""
    return ArmaGarchForecaster().forecast(model, history, horizon, name)
