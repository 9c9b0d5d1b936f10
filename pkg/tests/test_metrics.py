"""Tests for MAPE metrics, reports and charts."""

import datetime as dt

import numpy as np
import pytest

from src.evaluation.charts import plot_all
from src.evaluation.metrics import (
    ATTRIBUTION_NOTE,
    COMBINED,
    ape,
    daily_values,
    lag_diff_report,
    mape,
    mape_detail,
    mape_report,
    season_of,
    season_report,
    ssm_composition_report,
    ssm_report,
    top_member,
    write_report,
)
from src.models import BacktestRecord, BacktestResult, ModelClass, SsmReportRow, Zone
from src.series.windows import LAG_DIFF_BUCKETS

DAY = dt.date(2018, 1, 30)


def record(day, block, actual, uni, multi, weights, lag_diff=None, fallback=False) -> BacktestRecord:
    forecasts = {"HW_1": uni, "Specf1": multi}
    combined = sum(w * forecasts[m] for m, w in weights.items())
    return BacktestRecord(
        date=day, block=block, actual=actual, forecasts=forecasts, combined=combined,
        ssm=sorted(weights), weights=weights, lag_diff=lag_diff, fallback=fallback,
    )


def result() -> BacktestResult:
    records = []
    for offset in range(3):
        day = DAY + dt.timedelta(days=offset)
        for block in range(1, 97):
            weights = {"HW_1": 0.7, "Specf1": 0.3} if block <= 48 else {"HW_1": 0.2, "Specf1": 0.8}
            lag = [10.0, 30.0, 70.0][offset]
            records.append(record(day, block, 4.0, 3.0, 5.0, weights, lag))
    return BacktestResult(
        zone=Zone.N3,
        records=records,
        model_classes={"HW_1": ModelClass.UNIVARIATE, "Specf1": ModelClass.MULTIVARIATE},
        selections=[
            SsmReportRow(date=DAY, block=1, model="HW_1", mcs_pvalue=1.0, mean_loss=5.0, weight=0.7),
            SsmReportRow(date=DAY, block=1, model="ARFIMA1", mcs_pvalue=0.02, mean_loss=30.0, eliminated_at=1),
        ],
    )


class TestMape:
    """Test cases for ape and mape."""

    def test_mape_value(self):
        assert mape([2.0, 4.0], [1.0, 5.0]) == pytest.approx(37.5)

    def test_floor_excludes_records(self):
        detail = mape_detail([0.0, 0.01, 2.0], [1.0, 1.0, 3.0])

        assert detail.excluded == 2
        assert detail.included == 1
        assert detail.value == pytest.approx(50.0)

    def test_all_excluded(self):
        with pytest.raises(ValueError):
            mape([0.0, 0.005], [1.0, 1.0])

    def test_unequal_lengths(self):
        with pytest.raises(ValueError):
            ape([1.0, 2.0], [1.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            mape([], [])

    def test_season_lookup(self):
        assert season_of(dt.date(2018, 1, 5)) == "Winter"
        assert season_of(dt.date(2018, 8, 5)) == "Monsoon"
        assert season_of(dt.date(2018, 11, 5)) == "Fall"


class TestReports:
    """Test cases for the tabular reports."""

    def setup_method(self):
        """Set up test fixtures."""
        self.result = result()

    def test_daily_mape(self):
        frame = mape_report(self.result)

        assert list(frame["date"]) == ["2018-01-30", "2018-01-31", "2018-02-01"]
        assert frame["HW_1_mape"].iloc[0] == pytest.approx(25.0)
        assert frame["Specf1_mape"].iloc[0] == pytest.approx(25.0)
        assert frame["excluded"].tolist() == [0, 0, 0]
        assert f"{COMBINED}_mape" in frame.columns

    def test_blockwise_mape(self):
        frame = mape_report(self.result, "blockwise")

        assert len(frame) == 96
        # 0.7*3 + 0.3*5 = 3.6 for the first half
        assert frame[f"{COMBINED}_mape"].iloc[0] == pytest.approx(10.0)
        assert frame[f"{COMBINED}_var"].iloc[0] == pytest.approx(0.0)

    def test_unknown_granularity(self):
        with pytest.raises(ValueError):
            mape_report(self.result, "hourly")

    def test_lag_diff_columns(self):
        frame = lag_diff_report(self.result)

        assert list(frame.columns[2:]) == list(LAG_DIFF_BUCKETS)
        assert len(frame.columns) - 2 == 4

    def test_lag_diff_shares(self):
        """Half the blocks lean univariate, half multivariate, in every bucket."""
        frame = lag_diff_report(self.result)

        overall = frame[frame["period"] == "all"].set_index("model_class")
        assert overall.loc["univariate", "<20"] == pytest.approx(50.0)
        assert overall.loc["multivariate", ">60"] == pytest.approx(50.0)
        january = frame[frame["period"] == "2018-01"].set_index("model_class")
        assert np.isnan(january.loc["univariate", ">60"])

    def test_top_member_tie(self):
        r = record(DAY, 1, 4.0, 3.0, 5.0, {"Specf1": 0.5, "HW_1": 0.5})

        assert top_member(r) == "HW_1"

    def test_fallback_blocks_left_out(self):
        """Equal-weight fallback blocks have no top member and do not shift the shares."""
        tied = {"HW_1": 0.5, "Specf1": 0.5}
        extra = [record(DAY + dt.timedelta(days=2), 1, 4.0, 3.0, 5.0, tied, 70.0, fallback=True)] * 40
        padded = self.result.model_copy(update={"records": self.result.records + extra})

        overall = lag_diff_report(padded)
        overall = overall[overall["period"] == "all"].set_index("model_class")

        assert overall.loc["univariate", ">60"] == pytest.approx(50.0)
        assert overall.loc["multivariate", ">60"] == pytest.approx(50.0)

    def test_single_member_fallback_still_attributed(self):
        lone = record(DAY, 1, 4.0, 3.0, 5.0, {"Specf1": 1.0}, 70.0, fallback=True)
        only = self.result.model_copy(update={"records": [lone]})

        frame = lag_diff_report(only).set_index(["period", "model_class"])

        assert frame.loc[("all", "multivariate"), ">60"] == pytest.approx(100.0)

    def test_missing_model_class_rejected(self):
        unknown = self.result.model_copy(update={"model_classes": {"HW_1": ModelClass.UNIVARIATE}})

        with pytest.raises(ValueError, match="Specf1"):
            lag_diff_report(unknown)

    def test_season_report(self):
        frame = season_report(self.result)

        assert frame["season"].tolist() == ["Winter"]
        assert frame["period_start"].iloc[0] == "2018-01-30"
        assert frame["best_model"].iloc[0] == "HW_1"
        assert frame["records"].iloc[0] == 3 * 96

    def test_ssm_composition(self):
        frame = ssm_composition_report(self.result)

        assert set(frame["share"]) == {100.0}
        assert set(frame["block_group"]) == {"1-20", "21-40", "41-60", "61-72", "73-96"}

    def test_ssm_report_survivors(self):
        assert ssm_report(self.result)["model"].tolist() == ["HW_1"]
        full = ssm_report(self.result, survivors_only=False)
        assert full["eliminated_at"].tolist()[1] == 1

    def test_empty_result(self):
        empty = BacktestResult(zone=Zone.N3)

        with pytest.raises(ValueError):
            mape_report(empty)
        with pytest.raises(ValueError):
            lag_diff_report(empty)

    def test_write_report_comment(self, tmp_path):
        path = tmp_path / "lag_diff.csv"

        write_report(lag_diff_report(self.result), path, ATTRIBUTION_NOTE)

        lines = path.read_text().splitlines()
        assert lines[0] == ATTRIBUTION_NOTE
        assert lines[1] == "period,model_class,<20,20-40,40-60,>60"

    def test_daily_values(self):
        series = daily_values(self.result, DAY)

        assert series["actual"].shape == (96,)
        assert series[COMBINED][0] == pytest.approx(3.6)
        assert series["Specf1"][95] == 5.0


class TestCharts:
    """Test cases for the SVG charts."""

    def test_one_chart_per_day(self, tmp_path):
        paths = plot_all(result(), tmp_path / "charts", models=["HW_1"])

        assert [p.name for p in paths] == [
            "chart_2018-01-30.svg", "chart_2018-01-31.svg", "chart_2018-02-01.svg",
        ]
        assert paths[0].read_text().lstrip().startswith("<?xml")
