"""Parser for exchange price and fundamental-driver CSV files."""

import datetime as dt
import io
import logging
import re
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import DataFormatError
from src.models import BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix, PriceSeries, Zone

logger = logging.getLogger(__name__)

ByteSource = Union[bytes, BinaryIO]


class MarketCsvParser:
    """Parses block-wise price and driver CSV files into validated containers."""

    PRICE_HEADER = ("date", "block", "zone", "price")
    DRIVER_KEYS = ("date", "block")
    PARSER_LINE_PATTERN = r'line (\d+)'
    DATE_PATTERN = r'^\d{4}-\d{2}-\d{2}$'

    def parse_prices(self, source: ByteSource) -> PriceSeries:
        """Parse a `date,block,zone,price` CSV.

        Args:
            source: UTF-8 CSV bytes or a binary stream

        Returns:
            Contiguous PriceSeries; gaps are missing-masked
        """
        frame = self._read_frame(source)
        header = tuple(frame.columns)
        if header != self.PRICE_HEADER:
            raise DataFormatError(f"expected header {','.join(self.PRICE_HEADER)}, got {','.join(header)}", line_number=1)

        prices: Dict[int, float] = {}
        zone: Optional[Zone] = None
        for i, record in enumerate(frame.itertuples(index=False, name=None)):
            line = i + 2
            date_text, block_text, zone_text, price_text = (self._cell(c) for c in record)
            ts = self._timestamp(date_text, block_text, line)
            row_zone = self._zone(zone_text, line)
            if zone is None:
                zone = row_zone
            elif row_zone != zone:
                raise DataFormatError(f"mixed zones in one file ({zone.value} and {row_zone.value})", line_number=line)
            price = self._number(price_text, line, "price")
            if price is None:
                raise DataFormatError("price cell is empty", line_number=line)
            if price < 0:
                raise DataFormatError(f"negative price {price_text}", line_number=line)
            previous = prices.get(ts.ordinal)
            if previous is not None and previous != price:
                raise DataFormatError(f"duplicate {ts} with conflicting prices", line_number=line)
            prices[ts.ordinal] = price

        if not prices:
            raise DataFormatError("price file has no data rows")

        first, last = min(prices), max(prices)
        values = np.full(last - first + 1, np.nan)
        for ordinal, price in prices.items():
            values[ordinal - first] = price
        missing = np.isnan(values)
        if missing.any():
            logger.info("price file has %d missing blocks; masked", int(missing.sum()))
        return PriceSeries(zone=zone, start=BlockTimestamp.from_ordinal(first), values=values, missing=missing)

    def parse_drivers(self, source: ByteSource) -> DriverMatrix:
        """Parse a `date,block,<col1>,...` CSV.

        Blank cells (and absent rows) are forward-filled from the previous
        block of the same day; a gap with nothing earlier that day is an error,
        as is a whole day missing inside the covered range.
        """
        frame = self._read_frame(source)
        header = tuple(frame.columns)
        if header[:2] != self.DRIVER_KEYS or len(header) < 3:
            raise DataFormatError("expected header date,block,<col1>,...", line_number=1)
        columns = header[2:]

        rows: Dict[int, Tuple[List[Optional[float]], int]] = {}
        for i, record in enumerate(frame.itertuples(index=False, name=None)):
            line = i + 2
            cells = [self._cell(c) for c in record]
            ts = self._timestamp(cells[0], cells[1], line)
            if ts.ordinal in rows:
                raise DataFormatError(f"duplicate row for {ts}", line_number=line)
            rows[ts.ordinal] = ([self._number(c, line, name) for c, name in zip(cells[2:], columns)], line)

        if not rows:
            raise DataFormatError("driver file has no data rows")

        first, last = min(rows), max(rows)
        values = np.full((last - first + 1, len(columns)), np.nan)
        days_present = set()
        for ordinal, (cells, _) in rows.items():
            days_present.add(BlockTimestamp.from_ordinal(ordinal).date)
            values[ordinal - first] = [np.nan if c is None else c for c in cells]

        start = BlockTimestamp.from_ordinal(first)
        day = start.date
        while day <= BlockTimestamp.from_ordinal(last).date:
            if day not in days_present:
                raise DataFormatError(f"whole day {day.isoformat()} missing inside driver range")
            day += dt.timedelta(days=1)

        self._forward_fill(values, start, columns, rows, first)
        return DriverMatrix(start=start, columns=tuple(columns), values=values)

    def _forward_fill(
        self,
        values: np.ndarray,
        start: BlockTimestamp,
        columns: Tuple[str, ...],
        rows: Dict[int, Tuple[List[Optional[float]], int]],
        first: int,
    ) -> None:
        """Fill gaps in place from the previous block of the same day."""
        filled = 0
        for k in range(values.shape[0]):
            gaps = np.isnan(values[k])
            if not gaps.any():
                continue
            ts = start.advance(k)
            if k == 0 or ts.block == 1:
                line = rows.get(first + k, (None, None))[1]
                missing_cols = ",".join(c for c, g in zip(columns, gaps) if g)
                raise DataFormatError(f"blank {missing_cols} at {ts} with nothing earlier that day to fill from", line_number=line)
            values[k, gaps] = values[k - 1, gaps]
            filled += int(gaps.sum())
        if filled:
            logger.info("forward-filled %d driver cells", filled)

    def _read_frame(self, source: ByteSource) -> pd.DataFrame:
        """Read the CSV as strings so every cell can be validated with its line number."""
        raw = source if isinstance(source, (bytes, bytearray)) else source.read()
        try:
            text = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataFormatError(f"source is not UTF-8: {exc}") from None
        try:
            frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=False)
        except pd.errors.EmptyDataError:
            raise DataFormatError("empty CSV source") from None
        except pd.errors.ParserError as exc:
            match = re.search(self.PARSER_LINE_PATTERN, str(exc))
            raise DataFormatError(f"malformed row: {exc}", line_number=int(match.group(1)) if match else None) from None
        frame.columns = [str(c).strip() for c in frame.columns]
        return frame

    def _cell(self, value: object) -> str:
        if value is None or (isinstance(value, float) and np.isnan(value)):
            return ""
        return str(value).strip()

    def _timestamp(self, date_text: str, block_text: str, line: int) -> BlockTimestamp:
        if not re.match(self.DATE_PATTERN, date_text):
            raise DataFormatError(f"malformed date '{date_text}'", line_number=line)
        try:
            day = dt.date.fromisoformat(date_text)
            block = int(block_text)
        except ValueError:
            raise DataFormatError(f"malformed date/block '{date_text},{block_text}'", line_number=line) from None
        if not 1 <= block <= BLOCKS_PER_DAY:
            raise DataFormatError(f"block {block} outside 1..{BLOCKS_PER_DAY}", line_number=line)
        return BlockTimestamp(date=day, block=block)

    def _zone(self, text: str, line: int) -> Zone:
        try:
            return Zone(text)
        except ValueError:
            raise DataFormatError(f"unknown zone '{text}'", line_number=line) from None

    def _number(self, text: str, line: int, column: str) -> Optional[float]:
        if text == "":
            return None
        try:
            value = float(text)
        except ValueError:
            raise DataFormatError(f"non-numeric {column} '{text}'", line_number=line) from None
        if not np.isfinite(value):
            raise DataFormatError(f"non-finite {column} '{text}'", line_number=line)
        return value


def serialize_price_csv(series: PriceSeries) -> bytes:
    """Write a PriceSeries in the schema `parse_price_csv` reads (missing blocks omitted)."""
    rows = []
    for k in np.flatnonzero(~series.missing):
        ts = series.timestamp_at(int(k))
        rows.append((ts.date.isoformat(), ts.block, series.zone.value, repr(float(series.values[k]))))
    frame = pd.DataFrame(rows, columns=list(MarketCsvParser.PRICE_HEADER))
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def serialize_driver_csv(matrix: DriverMatrix) -> bytes:
    """Write a DriverMatrix in the schema `parse_driver_csv` reads."""
    stamps = [matrix.start.advance(k) for k in range(len(matrix))]
    frame = pd.DataFrame({
        "date": [ts.date.isoformat() for ts in stamps],
        "block": [ts.block for ts in stamps],
    })
    for j, name in enumerate(matrix.columns):
        frame[name] = [repr(float(v)) for v in matrix.values[:, j]]
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def parse_price_csv(source: ByteSource) -> PriceSeries:
    """Convenience function to parse a price CSV.

    Args:
        source: UTF-8 CSV bytes or binary stream

    Returns:
        Parsed PriceSeries
    """
    return MarketCsvParser().parse_prices(source)


def parse_driver_csv(source: ByteSource) -> DriverMatrix:
    """Convenience function to parse a driver CSV."""
    return MarketCsvParser().parse_drivers(source)


def load_price_file(path: Path) -> PriceSeries:
    with open(path, "rb") as handle:
        return parse_price_csv(handle)


def load_driver_file(path: Path) -> DriverMatrix:
    with open(path, "rb") as handle:
        return parse_driver_csv(handle)
