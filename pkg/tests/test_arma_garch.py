"""Tests for ARMA-GARCH estimation."""

import datetime as dt

import numpy as np
import pytest

from src.errors import DegenerateInputError, FitError, InsufficientHistoryError
from src.models import BlockTimestamp, PriceSeries, Zone
from src.univariate.arma_garch import (
    AgConfig,
    AgModel,
    fit_arma_garch,
    fit_garch11,
    forecast_arma_garch,
    garch_variances,
)

START = BlockTimestamp.first_of(dt.date(2016, 1, 1))


def garch_path(n: int, omega: float, alpha1: float, beta1: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    e = np.empty(n)
    h = omega / (1.0 - alpha1 - beta1)
    for t in range(n):
        e[t] = np.sqrt(h) * z[t]
        h = omega + alpha1 * e[t] ** 2 + beta1 * h
    return e


class TestGarch:
    """Test cases for GARCH(1,1) likelihood fitting."""

    def test_variance_recursion(self):
        """h_t = omega + alpha e_{t-1}^2 + beta h_{t-1}."""
        e = np.array([1.0, -2.0, 0.5])

        h = garch_variances(e, 0.1, 0.2, 0.7, 1.0)

        assert h[0] == 1.0
        assert h[1] == pytest.approx(0.1 + 0.2 * 1.0 + 0.7 * 1.0)
        assert h[2] == pytest.approx(0.1 + 0.2 * 4.0 + 0.7 * h[1])

    def test_fit_is_stationary(self):
        """Fitted persistence stays below one with positive variances."""
        fit = fit_garch11(garch_path(2000, 0.05, 0.15, 0.75, seed=1))

        assert fit.alpha1 + fit.beta1 < 1.0
        assert np.all(fit.h > 0)
        assert not fit.homoskedastic

    def test_white_noise_falls_back_to_constant(self):
        """Without volatility clustering the GARCH terms are dropped."""
        e = np.random.default_rng(2).normal(0.0, 2.0, 2000)

        fit = fit_garch11(e)

        assert fit.homoskedastic
        assert fit.alpha1 == 0.0 and fit.beta1 == 0.0
        assert fit.omega == pytest.approx(np.var(e))

    def test_zero_variance(self):
        with pytest.raises(DegenerateInputError):
            fit_garch11(np.zeros(500))

    def test_invalid_persistence_rejected(self):
        with pytest.raises(ValueError):
            AgModel(
                p=0, q=0, phi=np.zeros(0), theta=np.zeros(0), mu=0.0,
                omega=0.1, alpha1=0.5, beta1=0.6, h=np.ones(3),
            )

    @pytest.mark.slow
    def test_recovers_parameters(self):
        """(alpha, beta) = (0.1, 0.8) within 0.1 on 5000 samples."""
        fit = fit_garch11(garch_path(5000, 0.1, 0.1, 0.8, seed=3))

        assert abs(fit.alpha1 - 0.1) <= 0.1
        assert abs(fit.beta1 - 0.8) <= 0.1


class TestArmaGarchForecaster:
    """Test cases for the ag model."""

    def setup_method(self):
        """Set up test fixtures."""
        n = 20 * 96
        e = garch_path(n, 0.01, 0.1, 0.8, seed=4)
        x = np.empty(n)
        x[0] = 0.0
        for t in range(1, n):
            x[t] = 0.6 * x[t - 1] + e[t]
        self.series = PriceSeries(zone=Zone.N3, start=START, values=5.0 + x)
        self.config = AgConfig(max_p=1, max_q=1)

    def test_forecast_has_variance_path(self):
        """The variance path decays monotonically toward the unconditional level."""
        model = fit_arma_garch(self.series, self.config)

        forecast = forecast_arma_garch(model, self.series)

        assert forecast.values.shape == (96,)
        assert forecast.variance.shape == (96,)
        assert np.all(forecast.variance > 0)
        gap = np.abs(forecast.variance - model.unconditional_variance)
        assert np.all(np.diff(gap) <= 1e-12)
        assert forecast.date == dt.date(2016, 1, 21)

    def test_mean_reverts(self):
        """Far-horizon means approach the sample mean."""
        model = fit_arma_garch(self.series, self.config)

        forecast = forecast_arma_garch(model, self.series)

        assert forecast.values[-1] == pytest.approx(model.mu, abs=0.05)

    def test_constant_input(self):
        flat = PriceSeries(zone=Zone.N3, start=START, values=np.full(500, 2.0))

        with pytest.raises(DegenerateInputError):
            fit_arma_garch(flat, self.config)

    def test_short_input(self):
        with pytest.raises(InsufficientHistoryError):
            fit_arma_garch(self.series.slice(0, 50), self.config)

    def test_missing_entries(self):
        values = self.series.values.copy()
        values[3] = np.nan

        with pytest.raises(FitError):
            fit_arma_garch(PriceSeries(zone=Zone.N3, start=START, values=values), self.config)
