"""Tests for MCS selection and forecast combination."""

import datetime as dt

import numpy as np
import pytest

from src.mcs.confidence_set import (
    BLOCK_GROUPS,
    McsEnsemble,
    block_group,
    bootstrap_pvalue,
    combine,
    combine_blocks,
    equal_weight_set,
    inverse_loss_weights,
    loss_differentials,
    mcs_run,
    moving_block_indices,
)
from src.models import LossMatrix, McsConfig, ModelForecast

DAY = dt.date(2018, 3, 15)


def loss_matrix(**rows) -> LossMatrix:
    models = tuple(rows)
    values = np.array([rows[m] for m in models], dtype=float)
    return LossMatrix(models=models, days=tuple(str(i) for i in range(values.shape[1])), values=values)


def forecast(name: str, value: float, day: dt.date = DAY) -> ModelForecast:
    return ModelForecast(model=name, date=day, values=np.full(96, value))


class TestWeights:
    """Test cases for inverse-loss weighting."""

    def test_inverse_weights(self):
        weights = inverse_loss_weights({"a": 2.0, "b": 6.0})

        assert weights["a"] == pytest.approx(0.75)
        assert weights["b"] == pytest.approx(0.25)

    def test_zero_loss_takes_all(self):
        weights = inverse_loss_weights({"a": 0.0, "b": 1.0, "c": 0.0})

        assert weights == {"a": 0.5, "b": 0.0, "c": 0.5}

    def test_equal_weight_set(self):
        ss = equal_weight_set(["b", "a"], 0.1)

        assert ss.survivors == ["a", "b"]
        assert ss.weights == {"a": 0.5, "b": 0.5}


class TestBootstrap:
    """Test cases for the moving-block bootstrap."""

    def test_indices_shape_and_range(self):
        idx = moving_block_indices(10, 3, 50, np.random.default_rng(0))

        assert idx.shape == (50, 10)
        assert idx.min() >= 0 and idx.max() < 10

    def test_blocks_are_consecutive(self):
        """Within a block, indices advance by one with circular wrap."""
        idx = moving_block_indices(7, 2, 20, np.random.default_rng(1))

        np.testing.assert_array_equal(idx[:, 1], (idx[:, 0] + 1) % 7)

    def test_block_longer_than_sample(self):
        idx = moving_block_indices(3, 10, 5, np.random.default_rng(2))

        assert idx.shape == (5, 3)

    def test_differentials_sum_to_zero(self):
        values = np.random.default_rng(3).uniform(size=(4, 12))

        np.testing.assert_allclose(loss_differentials(values).sum(axis=0), 0.0, atol=1e-12)

    def test_pvalue_needs_replicates(self):
        L = loss_matrix(a=[1.0, 2.0, 3.0], b=[2.0, 2.0, 2.0])

        with pytest.raises(ValueError):
            bootstrap_pvalue(L, n_bootstrap=50)


class TestMcsRun:
    """Test cases for mcs_run."""

    def test_equal_losses_keep_everyone(self):
        L = loss_matrix(a=[1.0] * 10, b=[1.0] * 10, c=[1.0] * 10)

        ss = mcs_run(L)

        assert ss.survivors == ["a", "b", "c"]
        assert all(w == pytest.approx(1 / 3) for w in ss.weights.values())
        assert ss.elimination_order == []

    def test_dominated_constant_eliminated(self):
        """A model with uniformly higher constant loss is removed with p <= 0.01."""
        L = loss_matrix(good=[1.0] * 10, bad=[5.0] * 10)

        ss = mcs_run(L)

        assert ss.survivors == ["good"]
        assert ss.weights == {"good": 1.0}
        assert ss.pvalues["bad"] <= 0.01
        assert ss.pvalues["good"] == 1.0
        assert ss.degenerate

    def test_noisy_dominance(self):
        rng = np.random.default_rng(4)
        L = loss_matrix(
            a=rng.uniform(0.5, 1.5, 30),
            b=rng.uniform(4.0, 6.0, 30),
            c=rng.uniform(0.5, 1.5, 30),
        )

        ss = mcs_run(L, n_bootstrap=500)

        assert "b" not in ss.survivors
        assert ss.elimination_order[0] == "b"
        assert not ss.degenerate

    def test_pvalues_are_running_max(self):
        rng = np.random.default_rng(5)
        L = loss_matrix(
            a=rng.uniform(0.9, 1.1, 20),
            b=rng.uniform(1.9, 2.1, 20),
            c=rng.uniform(3.9, 4.1, 20),
        )

        ss = mcs_run(L, n_bootstrap=200)

        eliminated = [ss.pvalues[m] for m in ss.elimination_order]
        assert eliminated == sorted(eliminated)
        assert ss.elimination_order[0] == "c"

    def test_seeded_runs_agree(self):
        rng = np.random.default_rng(6)
        L = loss_matrix(a=rng.uniform(size=15), b=rng.uniform(size=15) + 0.1)

        first = mcs_run(L, n_bootstrap=300, seed=9)
        second = mcs_run(L, n_bootstrap=300, seed=9)

        assert first == second

    def test_model_order_does_not_matter(self):
        rng = np.random.default_rng(7)
        rows = {
            "a": rng.uniform(0.9, 1.3, 20),
            "b": rng.uniform(1.0, 1.4, 20),
            "c": rng.uniform(2.5, 3.5, 20),
            "d": rng.uniform(0.8, 1.2, 20),
        }

        forward = mcs_run(loss_matrix(**rows), n_bootstrap=300, seed=2)
        backward = mcs_run(loss_matrix(**dict(reversed(list(rows.items())))), n_bootstrap=300, seed=2)

        assert set(forward.survivors) == set(backward.survivors)
        assert forward.pvalues == backward.pvalues
        assert forward.weights == pytest.approx(backward.weights)

    def test_sets_nest_in_alpha(self):
        """A smaller alpha never yields a smaller superior set."""
        rng = np.random.default_rng(10)
        L = loss_matrix(
            a=rng.uniform(0.9, 1.1, 12),
            b=rng.uniform(1.0, 1.4, 12),
            c=rng.uniform(1.1, 1.6, 12),
            d=rng.uniform(3.0, 3.5, 12),
        )

        wide = mcs_run(L, alpha=0.02, n_bootstrap=300, seed=1)
        narrow = mcs_run(L, alpha=0.25, n_bootstrap=300, seed=1)

        assert set(narrow.survivors) <= set(wide.survivors)

    @pytest.mark.slow
    def test_best_model_coverage(self):
        """One model 0.5 better than four equals: kept in >= 85% of runs, alone in >= 60%."""
        rng = np.random.default_rng(11)
        kept = alone = 0
        runs = 200
        for run in range(runs):
            means = np.array([1.5, 2.0, 2.0, 2.0, 2.0])
            values = np.abs(rng.normal(means[:, None], 0.1, size=(5, 10)))
            L = LossMatrix(models=("best", "m1", "m2", "m3", "m4"), days=tuple(str(t) for t in range(10)), values=values)
            ss = mcs_run(L, alpha=0.10, n_bootstrap=1000, seed=run)
            kept += "best" in ss.survivors
            alone += ss.survivors == ["best"]

        assert kept / runs >= 0.85
        assert alone / runs >= 0.60

    @pytest.mark.slow
    def test_equal_models_usually_retained(self):
        """With equal expected loss both models survive in most trials."""
        rng = np.random.default_rng(7)
        kept = 0
        trials = 100
        for trial in range(trials):
            L = loss_matrix(a=rng.exponential(size=100), b=rng.exponential(size=100))
            ss = mcs_run(L, n_bootstrap=200, seed=trial)
            kept += len(ss.survivors) == 2

        assert kept / trials >= 0.8


class TestCombine:
    """Test cases for forecast combination."""

    def setup_method(self):
        """Set up test fixtures."""
        self.forecasts = {"a": forecast("a", 4.0), "b": forecast("b", 8.0)}
        self.ss = mcs_run(loss_matrix(a=[2.0] * 5, b=[6.0] * 5), alpha=1e-9)

    def test_weighted_sum(self):
        combined = combine(self.ss, self.forecasts)

        np.testing.assert_allclose(combined.values, 0.75 * 4.0 + 0.25 * 8.0)
        assert combined.date == DAY
        assert len(combined.weights) == 96

    def test_missing_survivor(self):
        with pytest.raises(ValueError):
            combine(self.ss, {"a": self.forecasts["a"]})

    def test_no_forecasts(self):
        with pytest.raises(ValueError):
            combine_blocks([self.ss] * 96, {})

    def test_date_mismatch(self):
        with pytest.raises(ValueError):
            combine(self.ss, {"a": forecast("a", 1.0), "b": forecast("b", 1.0, DAY + dt.timedelta(days=1))})

    def test_non_negative_members_give_non_negative_combination(self):
        ss = equal_weight_set(["a", "b"], 0.1)

        combined = combine(ss, {"a": forecast("a", 0.0), "b": forecast("b", 0.0)})

        assert np.all(combined.values == 0.0)

    def test_negative_member_forecast_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            forecast("a", -3.0)


class TestMcsEnsemble:
    """Test cases for McsEnsemble.select_day."""

    def setup_method(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(8)
        self.history = {}
        for k in range(10):
            day = DAY - dt.timedelta(days=10 - k)
            self.history[day] = {
                "good": 0.10 + rng.uniform(0, 0.01, 96),
                "bad": 0.50 + rng.uniform(0, 0.01, 96),
            }
        self.config = McsConfig(n_bootstrap=199, seed=3)

    def test_per_block_elimination(self):
        sets = McsEnsemble(self.config).select_day(DAY, ["good", "bad"], self.history)

        assert len(sets) == 96
        assert all(ss.survivors == ["good"] for ss in sets)

    def test_block_groups(self):
        config = self.config.model_copy(update={"group_blocks": True})

        sets = McsEnsemble(config).select_day(DAY, ["good", "bad"], self.history)

        assert len(sets) == 96
        distinct = {id(ss) for ss in sets}
        assert len(distinct) == len(BLOCK_GROUPS)
        assert sets[0] is sets[19] and sets[19] is not sets[20]

    def test_short_history_falls_back_to_equal_weights(self):
        first = min(self.history)

        sets = McsEnsemble(self.config).select_day(DAY, ["good", "bad"], {first: self.history[first]})

        assert sets[0].weights == {"bad": 0.5, "good": 0.5}

    def test_future_losses_ignored(self):
        """Only days before the target enter the window."""
        history = dict(self.history)
        history[DAY] = {"good": np.full(96, 9.0), "bad": np.zeros(96)}

        sets = McsEnsemble(self.config).select_day(DAY, ["good", "bad"], history)

        assert sets[0].survivors == ["good"]

    def test_new_model_without_history(self):
        """A model absent from the loss history cannot be tested and is left out."""
        sets = McsEnsemble(self.config).select_day(DAY, ["good", "bad", "new"], self.history)

        assert "new" not in sets[0].weights

    def test_missing_actuals_dropped(self):
        history = {d: {m: v.copy() for m, v in row.items()} for d, row in self.history.items()}
        for row in list(history.values())[:8]:
            for values in row.values():
                values[5] = np.nan

        sets = McsEnsemble(self.config).select_day(DAY, ["good", "bad"], history)

        assert sets[5].survivors == ["good"]
        assert sets[5].mean_losses["good"] < 0.2

    def test_block_group_lookup(self):
        assert block_group(1) == 0
        assert block_group(72) == 3
        assert block_group(96) == 4
        with pytest.raises(ValueError):
            block_group(97)
