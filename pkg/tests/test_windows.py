"""Tests for block windows and Lag_Diff."""

import datetime as dt

import numpy as np
import pytest

from src.errors import WindowError
from src.models import BlockTimestamp, DriverMatrix, PriceSeries, Zone
from src.series.windows import (
    driver_window,
    full_days_before,
    lag_diff,
    lag_diff_bucket,
    truncate,
    try_lag_diff,
    window,
    years_to_days,
)


class TestWindows:
    """Test cases for rolling windows."""

    def setup_method(self):
        """Set up test fixtures."""
        self.start = dt.date(2017, 1, 1)
        self.series = PriceSeries(
            zone=Zone.N3,
            start=BlockTimestamp.first_of(self.start),
            values=np.arange(10 * 96, dtype=float) + 1.0,
        )

    def test_window_length_and_end(self):
        """A 3-day window ending on day 5 covers days 3..5."""
        end = BlockTimestamp.last_of(self.start + dt.timedelta(days=4))

        w = window(self.series, end, 3)

        assert len(w) == 3 * 96
        assert w.end == end
        assert w.start == BlockTimestamp.first_of(self.start + dt.timedelta(days=2))

    def test_window_leaving_series(self):
        end = BlockTimestamp.last_of(self.start + dt.timedelta(days=1))

        with pytest.raises(WindowError):
            window(self.series, end, 3)

    def test_window_past_end(self):
        end = BlockTimestamp.last_of(self.start + dt.timedelta(days=20))

        with pytest.raises(WindowError):
            window(self.series, end, 2)

    def test_truncate_drops_later_entries(self):
        """Nothing after the cut survives."""
        cut = BlockTimestamp.last_of(self.start + dt.timedelta(days=3))

        short = truncate(self.series, cut)

        assert short.end == cut
        assert len(short) == 4 * 96

    def test_driver_window(self):
        matrix = DriverMatrix(
            start=BlockTimestamp.first_of(self.start), columns=("a",), values=np.arange(10 * 96, dtype=float)
        )
        end = BlockTimestamp.last_of(self.start + dt.timedelta(days=9))

        w = driver_window(matrix, end, 2)

        assert len(w) == 192
        assert w.values[-1, 0] == 10 * 96 - 1

    def test_years_to_days(self):
        """Named window lengths."""
        assert years_to_days(3.5) == 1278
        assert years_to_days(1.5) == 548
        assert years_to_days(1) == 365

    def test_full_days_before(self):
        start = BlockTimestamp(date=self.start, block=5)

        assert full_days_before(start, self.start + dt.timedelta(days=3)) == 2
        assert full_days_before(BlockTimestamp.first_of(self.start), self.start + dt.timedelta(days=3)) == 3

    def test_consecutive_windows_tile_the_series(self):
        """A window and the one ending just before it cover adjacent blocks without overlap."""
        end = BlockTimestamp.last_of(self.start + dt.timedelta(days=6))

        later = window(self.series, end, 3)
        earlier = window(self.series, later.start.advance(-1), 3)

        assert earlier.end.successor() == later.start
        joined = np.concatenate([earlier.values, later.values])
        np.testing.assert_array_equal(joined, self.series.values[96:7 * 96])


class TestLagDiff:
    """Test cases for day-on-day deviation."""

    def setup_method(self):
        """Set up test fixtures."""
        values = np.concatenate([np.full(96, 4.0), np.full(96, 5.0)])
        values[5] = 0.0
        self.day = dt.date(2017, 1, 1)
        self.series = PriceSeries(zone=Zone.N3, start=BlockTimestamp.first_of(self.day), values=values)

    def test_percentage_change(self):
        """(5 - 4) / 4 = 25%."""
        at = BlockTimestamp(date=self.day + dt.timedelta(days=1), block=1)

        assert lag_diff(self.series, at) == pytest.approx(25.0)

    def test_zero_previous_price(self):
        """Undefined when the day-earlier price is zero."""
        at = BlockTimestamp(date=self.day + dt.timedelta(days=1), block=6)

        with pytest.raises(WindowError):
            lag_diff(self.series, at)
        assert try_lag_diff(self.series, at) is None

    def test_first_day_has_no_lag(self):
        assert try_lag_diff(self.series, BlockTimestamp.first_of(self.day)) is None

    @pytest.mark.parametrize("percent,bucket", [
        (0.0, "<20"),
        (19.99, "<20"),
        (20.0, "20-40"),
        (40.0, "40-60"),
        (59.9, "40-60"),
        (60.0, ">60"),
        (250.0, ">60"),
    ])
    def test_buckets(self, percent, bucket):
        """Boundaries belong to the upper bucket."""
        assert lag_diff_bucket(percent) == bucket
