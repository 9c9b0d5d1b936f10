"""Tests for ARFIMA estimation and fractional differencing."""

import datetime as dt

import numpy as np
import pytest
from scipy.signal import fftconvolve, lfilter

from src.errors import DegenerateInputError, FitError, InsufficientHistoryError, WindowError
from src.models import BlockTimestamp, PriceSeries, Zone
from src.univariate.arfima import (
    ArfimaConfig,
    ArfimaEstimator,
    fit_arfima,
    forecast_arfima,
    frac_diff,
    frac_diff_weights,
)

START = BlockTimestamp.first_of(dt.date(2016, 1, 1))


def long_memory_series(d: float, n: int, seed: int = 0, level: float = 10.0, burn: int = 2000) -> PriceSeries:
    """ARFIMA(0, d, 0) from its MA(inf) weights psi_k = psi_{k-1} (k - 1 + d) / k, burn-in dropped."""
    k = np.arange(1, n + burn)
    psi = np.r_[1.0, np.cumprod((k - 1 + d) / k)]
    e = np.random.default_rng(seed).normal(size=n + burn)
    z = fftconvolve(e, psi)[burn:n + burn]
    return PriceSeries(zone=Zone.N3, start=START, values=level + z)


class TestFracDiff:
    """Test cases for the fractional difference filter."""

    def test_weights_recursion(self):
        """pi_1 = -d and pi_2 = d(d - 1) / 2."""
        w = frac_diff_weights(0.3, 5)

        assert w[0] == 1.0
        assert w[1] == pytest.approx(-0.3)
        assert w[2] == pytest.approx(0.3 * (0.3 - 1) / 2)

    def test_zero_d_is_identity(self):
        x = np.random.default_rng(1).normal(size=300)

        np.testing.assert_allclose(frac_diff(x, 0.0, 100), x)

    def test_unit_d_is_first_difference(self):
        """d = 1 reduces to x_t - x_{t-1}."""
        x = np.random.default_rng(2).normal(size=50)

        w = frac_diff(x, 1.0, 20)

        np.testing.assert_allclose(w[1:], np.diff(x), atol=1e-12)

    def test_round_trip(self):
        """Inverting the truncated filter recovers the input."""
        x = np.random.default_rng(3).normal(size=2000)

        w = frac_diff(x, 0.35, 100)
        back = lfilter([1.0], frac_diff_weights(0.35, 100), w)

        assert np.max(np.abs(back - x)) < 1e-6

    def test_non_finite_input(self):
        with pytest.raises(ValueError):
            frac_diff(np.array([1.0, np.nan, 2.0]), 0.2, 100)


class TestArfimaEstimator:
    """Test cases for ArfimaEstimator."""

    def setup_method(self):
        """Set up test fixtures."""
        self.config = ArfimaConfig(d_step=0.05, max_p=1, max_q=0)
        self.estimator = ArfimaEstimator(self.config)

    def test_constant_window(self):
        """Zero-variance input is degenerate."""
        flat = PriceSeries(zone=Zone.N3, start=START, values=np.full(400, 3.0))

        with pytest.raises(DegenerateInputError):
            self.estimator.fit(flat)

    def test_missing_entries(self):
        values = long_memory_series(0.2, 400).values.copy()
        values[10] = np.nan
        series = PriceSeries(zone=Zone.N3, start=START, values=values)

        with pytest.raises(FitError):
            self.estimator.fit(series)

    def test_too_short(self):
        short = long_memory_series(0.2, 60)

        with pytest.raises(InsufficientHistoryError):
            self.estimator.fit(short)

    def test_variant_window_enforced(self):
        """ARFIMA2 rejects a window that is not 1.5 years."""
        series = long_memory_series(0.2, 548 * 96 + 96, seed=4)

        with pytest.raises(WindowError):
            self.estimator.fit(series, variant="ARFIMA2")

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            self.estimator.fit(long_memory_series(0.2, 400), variant="ARFIMA9")

    def test_fit_reports_profile(self):
        """The CSS profile covers the whole d grid and the choice is its minimum."""
        model = self.estimator.fit(long_memory_series(0.25, 1500, seed=5))

        assert model.css_profile.size == self.config.d_grid().size
        assert model.d == pytest.approx(model.d_grid[int(np.nanargmin(model.css_profile))])
        assert model.p <= 1 and model.q == 0
        assert model.sigma2 > 0

    def test_forecast_shape_and_date(self):
        """96 non-negative values for the day after the history."""
        series = long_memory_series(0.2, 10 * 96, seed=6)
        model = fit_arfima(series, config=self.config)

        forecast = forecast_arfima(model, series, name="ARFIMA1")

        assert forecast.model == "ARFIMA1"
        assert forecast.date == dt.date(2016, 1, 11)
        assert forecast.values.shape == (96,)
        assert np.all(forecast.values >= 0)

    def test_forecast_needs_truncation_history(self):
        series = long_memory_series(0.2, 400, seed=7)
        model = fit_arfima(series, config=self.config)

        with pytest.raises(InsufficientHistoryError):
            forecast_arfima(model, series.slice(0, 50))

    @pytest.mark.slow
    def test_recovers_long_memory(self):
        """d = 0.3 is recovered within 0.1 on 5000 samples with AICc order selection."""
        config = ArfimaConfig()

        model = fit_arfima(long_memory_series(0.3, 5000, seed=11, burn=10000), config=config)

        assert abs(model.d - 0.3) <= 0.1
        assert model.p <= config.max_p and model.q <= config.max_q

    @pytest.mark.slow
    def test_white_noise_has_no_long_memory(self):
        noise = PriceSeries(zone=Zone.N3, start=START, values=10.0 + np.random.default_rng(12).normal(size=5000))

        model = fit_arfima(noise, config=ArfimaConfig())

        assert -0.1 <= model.d <= 0.1
