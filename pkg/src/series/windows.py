"""Rolling windows, day arithmetic and day-on-day price deviation."""

import datetime as dt
from typing import Optional

from src.errors import WindowError
from src.models import BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix, PriceSeries

LAG_DIFF_BUCKETS = ("<20", "20-40", "40-60", ">60")


def years_to_days(years: float) -> int:
    """Calendar-free conversion used for the multi-year training windows."""
    return int(round(years * 365.25))


def window(series: PriceSeries, end: BlockTimestamp, length_days: int) -> PriceSeries:
    """Return exactly `length_days` x 96 entries of `series` ending at `end`.

    Raises:
        WindowError: if the window leaves the series
    """
    if length_days < 1:
        raise WindowError("window length must be at least one day")
    stop = series.position(end) + 1
    begin = stop - length_days * BLOCKS_PER_DAY
    if begin < 0 or stop > len(series) or stop < 1:
        raise WindowError(
            f"{length_days}-day window ending {end} exits series {series.start}..{series.end}"
        )
    return series.slice(begin, stop)


def driver_window(matrix: DriverMatrix, end: BlockTimestamp, length_days: int) -> DriverMatrix:
    """Driver counterpart of `window`."""
    if length_days < 1:
        raise WindowError("window length must be at least one day")
    stop = matrix.position(end) + 1
    begin = stop - length_days * BLOCKS_PER_DAY
    if begin < 0 or stop > len(matrix) or stop < 1:
        raise WindowError(
            f"{length_days}-day driver window ending {end} exits matrix {matrix.start}..{matrix.end}"
        )
    return matrix.slice(begin, stop)


def truncate(series: PriceSeries, last: BlockTimestamp) -> PriceSeries:
    """Drop every entry after `last`."""
    stop = min(series.position(last) + 1, len(series))
    if stop < 1:
        raise WindowError(f"{last} precedes series start {series.start}")
    return series.slice(0, stop)


def truncate_drivers(matrix: DriverMatrix, last: BlockTimestamp) -> DriverMatrix:
    stop = min(matrix.position(last) + 1, len(matrix))
    if stop < 1:
        raise WindowError(f"{last} precedes driver start {matrix.start}")
    return matrix.slice(0, stop)


def full_days_before(series_start: BlockTimestamp, day: dt.date) -> int:
    """Number of complete days available strictly before `day`."""
    first_full = series_start.date if series_start.block == 1 else series_start.date + dt.timedelta(days=1)
    return max((day - first_full).days, 0)


def lag_diff(series: PriceSeries, at: BlockTimestamp) -> float:
    """Absolute day-on-day percentage change at a fixed block.

    Raises:
        WindowError: if either price is absent, masked, or the previous-day price is zero
    """
    current = series.value_at(at)
    previous = series.value_at(at.advance(-BLOCKS_PER_DAY))
    if current is None or previous is None:
        raise WindowError(f"lag_diff at {at} needs both the block and the same block a day earlier")
    if previous == 0:
        raise WindowError(f"lag_diff at {at} undefined: previous-day price is zero")
    return abs(current - previous) / previous * 100.0


def lag_diff_bucket(percent: float) -> str:
    """Reporting bucket: <20, [20,40), [40,60), >=60 (reported as '>60')."""
    if percent < 20:
        return LAG_DIFF_BUCKETS[0]
    if percent < 40:
        return LAG_DIFF_BUCKETS[1]
    if percent < 60:
        return LAG_DIFF_BUCKETS[2]
    return LAG_DIFF_BUCKETS[3]


def try_lag_diff(series: PriceSeries, at: BlockTimestamp) -> Optional[float]:
    try:
        return lag_diff(series, at)
    except WindowError:
        return None
