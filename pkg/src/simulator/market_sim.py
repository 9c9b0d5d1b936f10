"""Synthetic thin-market generator with fundamental shocks.

Driver row t holds the day-ahead schedule for delivery t + 96, so every shock
shows up in the drivers exactly one day before it moves the price. Phantom
schedule entries show up in the drivers and never in the price.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.config import resolve_seed
from src.errors import PlanError, WindowError
from src.models import (
    BLOCKS_PER_DAY,
    DEFAULT_DRIVER_COLUMNS,
    BlockTimestamp,
    DriverMatrix,
    PriceSeries,
    ShockEvent,
    ShockKind,
    SimConfig,
)
from src.parser.market_parser import serialize_driver_csv, serialize_price_csv

logger = logging.getLogger(__name__)

LEAD = BLOCKS_PER_DAY
SHOCK_LOG_HEADER = ["kind", "start_date", "start_block", "duration", "magnitude"]
DEMAND, OUTAGE, CONTRACT, OFFER_IPP, CORRIDOR, DS_GAP = range(len(DEFAULT_DRIVER_COLUMNS))
SHOCK_COLUMN: Dict[ShockKind, int] = {
    ShockKind.OUTAGE: OUTAGE,
    ShockKind.CONTRACT_END: CONTRACT,
    ShockKind.DEMAND_SURGE: DEMAND,
}
# sign of each driver in ds_gap = demand - offer_ipp + outage - contract_delta
GAP_SIGN: Dict[ShockKind, float] = {
    ShockKind.OUTAGE: 1.0,
    ShockKind.CONTRACT_END: -1.0,
    ShockKind.DEMAND_SURGE: 1.0,
}


class SimDataset(BaseModel):
    """Simulated prices, drivers and the shock log behind them."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    prices: PriceSeries
    drivers: DriverMatrix
    shocks: List[ShockEvent]
    raw: np.ndarray
    baseline: np.ndarray
    phantoms: List[ShockEvent] = Field(default_factory=list, description="Scheduled events that never moved the price")
    volatile: Optional[np.ndarray] = Field(None, description="Per-day volatile regime flags")

    def as_tuple(self) -> Tuple[PriceSeries, DriverMatrix, List[ShockEvent]]:
        return self.prices, self.drivers, self.shocks


def seasonal_baseline(config: SimConfig, n: int, offset: int = 0) -> np.ndarray:
    t = np.arange(offset, offset + n, dtype=float)
    out = np.full(n, config.base_price)
    for period, amplitude, phase in zip(config.seasonal_periods, config.seasonal_amplitudes, config.seasonal_phases):
        out += amplitude * np.sin(2.0 * np.pi * t / period + phase)
    return out


def shock_profile(shocks: List[ShockEvent], start: BlockTimestamp, n: int, coefficients: Dict[ShockKind, float]) -> np.ndarray:
    """Sum of coefficient x active magnitude over the series."""
    out = np.zeros(n)
    for event in shocks:
        first = event.start.ordinal - start.ordinal
        lo, hi = max(first, 0), min(first + event.duration, n)
        if lo < hi:
            out[lo:hi] += coefficients.get(event.kind, 0.0) * event.magnitude
    return out


class MarketSimulator:
    """Generates a seeded single-zone market.

    Shocks arrive in volatile spells (a two-state day regime) and most of them
    are confined to the evening peak, so volatility persists both in time and
    by block. Phantom events are scheduled a day ahead but never delivered.
    """

    def __init__(self, config: SimConfig):
        self.config = config

    def simulate(self) -> SimDataset:
        cfg = self.config
        rng = np.random.default_rng(resolve_seed(cfg.seed))
        n = cfg.days * BLOCKS_PER_DAY
        start = BlockTimestamp.first_of(cfg.start_date)

        volatile = self.volatile_days(rng)
        shocks = self._draw_shocks(rng, n, start, volatile)
        phantoms = self._draw_phantoms(rng, n, start)
        baseline = seasonal_baseline(cfg, n)
        noise = rng.normal(0.0, cfg.noise_sd, n) if cfg.noise_sd > 0 else np.zeros(n)
        raw = baseline + shock_profile(shocks, start, n, cfg.response) + noise
        prices = PriceSeries(zone=cfg.zone, start=start, values=np.maximum(raw, 0.0))

        drivers = self._drivers(rng, n, start, shocks + phantoms)
        logger.info(
            "simulated %d days (%d volatile) with %d shocks and %d phantom schedules",
            cfg.days, int(volatile.sum()), len(shocks), len(phantoms),
        )
        return SimDataset(
            prices=prices, drivers=drivers, shocks=shocks, phantoms=phantoms, raw=raw, baseline=baseline,
            volatile=volatile,
        )

    def volatile_days(self, rng: np.random.Generator) -> np.ndarray:
        """Day regime path: a two-state Markov chain started from its stationary law."""
        cfg = self.config
        if cfg.volatile_share >= 1.0:
            return np.ones(cfg.days, dtype=bool)
        leave = 1.0 / cfg.spell_days
        enter = leave * cfg.volatile_share / (1.0 - cfg.volatile_share)
        draws = rng.uniform(size=cfg.days)
        out = np.empty(cfg.days, dtype=bool)
        state = bool(draws[0] < cfg.volatile_share)
        for d in range(cfg.days):
            if d > 0:
                state = bool(draws[d] >= leave) if state else bool(draws[d] < enter)
            out[d] = state
        return out

    def _event(self, rng: np.random.Generator, n: int, start: BlockTimestamp, offset: int, peak: bool) -> ShockEvent:
        cfg = self.config
        kind = cfg.shock_kinds[int(rng.integers(len(cfg.shock_kinds)))]
        duration = int(rng.integers(cfg.duration_min, cfg.duration_max + 1))
        magnitude = float(rng.uniform(cfg.magnitude_min, cfg.magnitude_max))
        if peak:
            lo, hi = cfg.peak_blocks
            block = int(rng.integers(lo, hi + 1))
            offset = offset - offset % BLOCKS_PER_DAY + block - 1
            duration = min(duration, hi - block + 1)
        return ShockEvent(
            kind=kind,
            start=start.advance(offset),
            duration=min(duration, n - offset),
            magnitude=magnitude,
        )

    def _draw_shocks(
        self, rng: np.random.Generator, n: int, start: BlockTimestamp, volatile: np.ndarray,
    ) -> List[ShockEvent]:
        cfg = self.config
        if n <= LEAD or cfg.shock_rate == 0 or not cfg.shock_kinds:
            return []
        shocks = []
        # day 0 has no day-ahead schedule
        for day in np.flatnonzero(volatile[1:]) + 1:
            for _ in range(int(rng.poisson(cfg.volatile_rate))):
                offset = int(day) * BLOCKS_PER_DAY + int(rng.integers(BLOCKS_PER_DAY))
                shocks.append(self._event(rng, n, start, offset, rng.uniform() < cfg.peak_share))
        return sorted(shocks, key=lambda e: (e.start.ordinal, e.kind.value))

    def _draw_phantoms(self, rng: np.random.Generator, n: int, start: BlockTimestamp) -> List[ShockEvent]:
        """Schedule entries with no price effect, spread evenly over days and blocks."""
        cfg = self.config
        if n <= LEAD or cfg.shock_rate == 0 or cfg.phantom_ratio == 0 or not cfg.shock_kinds:
            return []
        count = int(rng.poisson(cfg.shock_rate * cfg.phantom_ratio * (cfg.days - 1)))
        phantoms = [self._event(rng, n, start, int(rng.integers(LEAD, n)), False) for _ in range(count)]
        return sorted(phantoms, key=lambda e: (e.start.ordinal, e.kind.value))

    def _drivers(self, rng: np.random.Generator, n: int, start: BlockTimestamp, shocks: List[ShockEvent]) -> DriverMatrix:
        cfg = self.config
        t = np.arange(LEAD, n + LEAD, dtype=float)
        daily = np.sin(2.0 * np.pi * t / BLOCKS_PER_DAY)
        values = np.zeros((n, len(DEFAULT_DRIVER_COLUMNS)))
        noise = rng.normal(0.0, cfg.driver_noise_sd, (n, 2)) if cfg.driver_noise_sd > 0 else np.zeros((n, 2))
        values[:, DEMAND] = cfg.demand_base + cfg.demand_amplitude * daily + noise[:, 0]
        values[:, OFFER_IPP] = cfg.offer_base + cfg.offer_amplitude * daily + noise[:, 1]
        values[:, CORRIDOR] = cfg.corridor_mw
        for event in shocks:
            row = event.start.ordinal - start.ordinal - LEAD
            values[row:row + event.duration, SHOCK_COLUMN[event.kind]] += event.magnitude
        values[:, DS_GAP] = values[:, DEMAND] - values[:, OFFER_IPP] + values[:, OUTAGE] - values[:, CONTRACT]
        return DriverMatrix(start=start, columns=DEFAULT_DRIVER_COLUMNS, values=values)


def simulate(config: SimConfig) -> SimDataset:
    """Convenience function to run the simulator."""
    return MarketSimulator(config).simulate()


def inject_shock(dataset: SimDataset, event: ShockEvent, coefficient: float, remove: bool = False) -> SimDataset:
    """Add (or, with `remove`, subtract) one event consistently in prices and drivers.

    Raises:
        WindowError: if the event or its day-ahead schedule leaves the dataset
    """
    prices, drivers = dataset.prices, dataset.drivers
    first = prices.position(event.start)
    if first - LEAD < 0 or first + event.duration > len(prices) or drivers.position(event.start) - LEAD < 0:
        raise WindowError(f"event {event.kind.value} at {event.start} for {event.duration} blocks leaves the dataset")
    if event.magnitude == 0:
        return dataset

    sign = -1.0 if remove else 1.0
    raw = dataset.raw.copy()
    raw[first:first + event.duration] += sign * coefficient * event.magnitude
    missing = prices.missing
    new_prices = PriceSeries(
        zone=prices.zone,
        start=prices.start,
        values=np.where(missing, np.nan, np.maximum(raw, 0.0)),
        missing=missing,
    )

    values = drivers.values.copy()
    row = drivers.position(event.start) - LEAD
    values[row:row + event.duration, SHOCK_COLUMN[event.kind]] += sign * event.magnitude
    values[row:row + event.duration, DS_GAP] += sign * GAP_SIGN[event.kind] * event.magnitude
    new_drivers = DriverMatrix(start=drivers.start, columns=drivers.columns, values=values)

    shocks = list(dataset.shocks)
    if remove:
        if event in shocks:
            shocks.remove(event)
    else:
        shocks.append(event)
    return SimDataset(
        prices=new_prices, drivers=new_drivers, shocks=shocks, raw=raw, baseline=dataset.baseline,
        phantoms=dataset.phantoms, volatile=dataset.volatile,
    )


def shock_log_frame(shocks: List[ShockEvent]) -> pd.DataFrame:
    rows = [
        (e.kind.value, e.start.date.isoformat(), e.start.block, e.duration, repr(float(e.magnitude)))
        for e in shocks
    ]
    return pd.DataFrame(rows, columns=SHOCK_LOG_HEADER)


def write_dataset(dataset: SimDataset, out_dir: Path) -> Dict[str, Path]:
    """Write prices.csv, drivers.csv and shocks.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "prices": out_dir / "prices.csv",
        "drivers": out_dir / "drivers.csv",
        "shocks": out_dir / "shocks.csv",
    }
    paths["prices"].write_bytes(serialize_price_csv(dataset.prices))
    paths["drivers"].write_bytes(serialize_driver_csv(dataset.drivers))
    paths["shocks"].write_bytes(shock_log_frame(dataset.shocks).to_csv(index=False, lineterminator="\n").encode("utf-8"))
    return paths


def load_sim_config(path: Path) -> SimConfig:
    """Read and validate a JSON simulator config.

    Raises:
        PlanError: if the file is missing or invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PlanError(f"cannot read simulator config {path}: {exc.strerror}") from None
    try:
        return SimConfig.model_validate_json(text)
    except ValidationError as exc:
        raise PlanError(f"invalid simulator config {path}: {exc}") from None
