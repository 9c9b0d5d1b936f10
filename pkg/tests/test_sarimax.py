"""Tests for SARIMAX with the lagged demand-supply gap."""

import datetime as dt

import numpy as np
import pytest

from src.errors import WindowError
from src.models import BlockTimestamp, DriverMatrix, PriceSeries, Zone
from src.univariate.arma import arma_forecast, fit_css
from src.univariate.sarimax import SarimaxForecaster, _builder, fit_forecast_sarimax

DAY0 = dt.date(2016, 6, 1)


class TestSarimax:
    """Test cases for SarimaxForecaster."""

    def setup_method(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(0)
        days = 9
        n = days * 96
        self.gap = 2000.0 + 500.0 * np.sin(np.arange(n) / 37.0) + rng.normal(0, 50, n)
        self.drivers = DriverMatrix(
            start=BlockTimestamp.first_of(DAY0), columns=("demand.N3", "ds_gap"),
            values=np.column_stack([np.full(n, 5000.0), self.gap]),
        )
        # price at t responds to the gap scheduled one day earlier
        prices = 1.0 + 0.001 * self.gap[: n - 96] + rng.normal(0, 0.01, n - 96)
        self.train = PriceSeries(zone=Zone.N3, start=BlockTimestamp.first_of(DAY0 + dt.timedelta(days=1)), values=prices)
        self.forecaster = SarimaxForecaster()

    def test_recovers_gap_coefficient(self):
        model, x_future = self.forecaster.fit(self.train, self.drivers)

        assert model.beta_x == pytest.approx(0.001, abs=1e-4)
        np.testing.assert_array_equal(x_future, self.gap[-96:])

    def test_forecast_follows_gap(self):
        """Next-day prices follow today's scheduled gap."""
        forecast = fit_forecast_sarimax(self.train, self.drivers)

        expected = 1.0 + 0.001 * self.gap[-96:]
        assert forecast.date == DAY0 + dt.timedelta(days=9)
        assert np.max(np.abs(forecast.values - expected)) < 0.05

    def test_drivers_must_precede_window(self):
        """The regressor needs the day before the training window."""
        late = self.drivers.slice(96, len(self.drivers))

        with pytest.raises(WindowError):
            self.forecaster.fit(self.train, late)

    def test_missing_gap_column(self):
        drivers = self.drivers.select(["demand.N3"])

        with pytest.raises(WindowError):
            self.forecaster.fit(self.train, drivers)

    def test_constant_gap(self):
        """A flat regressor gets a zero coefficient."""
        flat = DriverMatrix(
            start=self.drivers.start, columns=("ds_gap",), values=np.full(len(self.drivers), 100.0)
        )

        model, _ = self.forecaster.fit(self.train, flat)

        assert model.beta_x == 0.0
        assert model.intercept == pytest.approx(float(np.mean(self.train.values)))

    def test_zero_gap_reduces_to_seasonal_arma(self):
        """With a zero regressor the model is the pure seasonal ARMA of the demeaned prices."""
        zero = DriverMatrix(start=self.drivers.start, columns=("ds_gap",), values=np.zeros(len(self.drivers)))
        y = np.asarray(self.train.values, dtype=float)
        u = y - y.mean()
        arma = fit_css(u, 3, _builder(96))

        model, _ = self.forecaster.fit(self.train, zero)
        forecast = self.forecaster.fit_forecast(self.train, zero)

        assert model.beta_x == 0.0
        assert model.intercept == pytest.approx(y.mean())
        np.testing.assert_allclose([model.phi, model.theta, model.seasonal_phi], arma.params)
        expected = y.mean() + arma_forecast(u, model.ar, model.ma, 96)
        np.testing.assert_allclose(forecast.values, np.maximum(expected, 0.0), rtol=1e-10)
