"""Tests for gradient boosting."""

import numpy as np
import pytest

from src.boosting.gbm import GbmConfig, GradientBooster, fit_gbm, predict_gbm
from src.errors import FitError


class TestGradientBooster:
    """Test cases for GradientBooster."""

    def setup_method(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(0)
        self.X = rng.uniform(-2, 2, size=(300, 2))
        self.y = 4.0 + np.sin(self.X[:, 0]) + 0.5 * self.X[:, 1] + 0.05 * rng.normal(size=300)
        self.config = GbmConfig(n_trees=150, shrinkage=0.1, max_depth=3, min_leaf=5)

    def test_training_loss_non_increasing(self):
        """Training MSE never rises across boosting rounds on random problems."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            X = rng.normal(size=(80, 3))
            y = rng.normal(size=80) + X[:, 0] * X[:, 1]

            model = fit_gbm(X, y, GbmConfig(n_trees=30, shrinkage=0.2, min_leaf=3))

            trace = np.array(model.loss_trace)
            assert np.all(np.diff(trace) <= 1e-12 * trace[0])

    def test_fits_smooth_function(self):
        model = fit_gbm(self.X, self.y, self.config)

        predicted = predict_gbm(model, self.X)

        assert np.mean(np.abs(predicted - self.y)) < 0.15
        assert model.n_trees == 150

    def test_prediction_matches_training_trace(self):
        model = fit_gbm(self.X, self.y, self.config)

        residual = self.y - predict_gbm(model, self.X, floor=False)

        assert float(residual @ residual) / self.y.size == pytest.approx(model.loss_trace[-1])

    def test_constant_model_start(self):
        model = fit_gbm(self.X, self.y, GbmConfig(n_trees=1))

        assert model.f0 == pytest.approx(self.y.mean())
        assert model.loss_trace[0] == pytest.approx(self.y.var())

    def test_floor(self):
        model = fit_gbm(self.X, self.y - 10.0, self.config)

        assert np.all(predict_gbm(model, self.X) >= 0.0)
        assert np.all(GradientBooster().predict(model, self.X, floor=False) < 0.0)

    def test_empty_input(self):
        with pytest.raises(FitError):
            fit_gbm(np.zeros((0, 2)), np.zeros(0))

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            GbmConfig(shrinkage=1.5)
