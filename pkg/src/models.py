"""Data models for the thin-market price forecasting engine."""

import datetime as dt
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BLOCKS_PER_DAY = 96


def _frozen_array(value: Any, dtype: Any = float) -> np.ndarray:
    """Copy `value` into a read-only numpy array."""
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class Zone(str, Enum):
    """Congestion zones of the Indian grid."""
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    E1 = "E1"
    E2 = "E2"
    A1 = "A1"
    A2 = "A2"
    W1 = "W1"
    W2 = "W2"
    W3 = "W3"
    S1 = "S1"
    S2 = "S2"


class ModelFamily(str, Enum):
    """Estimator families available to the registry."""
    ARFIMA = "arfima"
    HOLT_WINTERS = "holt_winters"
    ARMA_GARCH = "arma_garch"
    SARIMAX = "sarimax"
    ANN = "ann"
    SVR = "svr"
    GBM = "gbm"


class ModelClass(str, Enum):
    """Attribution class used by the Lag_Diff report."""
    UNIVARIATE = "univariate"
    MULTIVARIATE = "multivariate"


class FeatureRecipe(str, Enum):
    """Feature recipes for the kernel and tree learners."""
    NODS = "nods"
    DS = "ds"
    PCA = "pca"


class ShockKind(str, Enum):
    """Fundamental events that move exchange prices."""
    OUTAGE = "outage"
    CONTRACT_END = "contract_end"
    DEMAND_SURGE = "demand_surge"


class BlockTimestamp(BaseModel):
    """A (date, block) pair addressing one 15-minute delivery interval."""
    model_config = ConfigDict(frozen=True)

    date: dt.date = Field(..., description="Delivery date (no timezone)")
    block: int = Field(..., ge=1, le=BLOCKS_PER_DAY, description="Block index, 1 = 00:00-00:15")

    @property
    def ordinal(self) -> int:
        """Absolute block count, consistent with chronological order."""
        return self.date.toordinal() * BLOCKS_PER_DAY + (self.block - 1)

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "BlockTimestamp":
        day, offset = divmod(ordinal, BLOCKS_PER_DAY)
        return cls(date=dt.date.fromordinal(day), block=offset + 1)

    @classmethod
    def first_of(cls, day: dt.date) -> "BlockTimestamp":
        return cls(date=day, block=1)

    @classmethod
    def last_of(cls, day: dt.date) -> "BlockTimestamp":
        return cls(date=day, block=BLOCKS_PER_DAY)

    def advance(self, blocks: int) -> "BlockTimestamp":
        """Move forward (or backward, for negative counts) by `blocks`."""
        return BlockTimestamp.from_ordinal(self.ordinal + blocks)

    def successor(self) -> "BlockTimestamp":
        return self.advance(1)

    def __lt__(self, other: "BlockTimestamp") -> bool:
        return self.ordinal < other.ordinal

    def __le__(self, other: "BlockTimestamp") -> bool:
        return self.ordinal <= other.ordinal

    def __gt__(self, other: "BlockTimestamp") -> bool:
        return self.ordinal > other.ordinal

    def __ge__(self, other: "BlockTimestamp") -> bool:
        return self.ordinal >= other.ordinal

    def __str__(self) -> str:
        return f"{self.date.isoformat()}#{self.block}"


class PriceSeries(BaseModel):
    """Contiguous block-indexed cleared prices for one zone.

    Entry k corresponds to `start` advanced by k blocks. Missing entries are
    flagged in `missing` and hold NaN in `values`.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    zone: Zone
    start: BlockTimestamp
    values: np.ndarray
    missing: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce_arrays(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            values = np.array(data.get("values", []), dtype=float)
            missing = data.get("missing")
            if missing is None:
                missing = np.isnan(values)
            missing = np.array(missing, dtype=bool)
            values = np.where(missing, np.nan, values) if missing.shape == values.shape else values
            data["values"] = _frozen_array(values)
            data["missing"] = _frozen_array(missing, dtype=bool)
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "PriceSeries":
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("price series needs at least one entry")
        if self.missing.shape != self.values.shape:
            raise ValueError("missing mask must match values")
        present = self.values[~self.missing]
        if not np.all(np.isfinite(present)):
            raise ValueError("non-missing prices must be finite")
        if np.any(present < 0):
            raise ValueError("prices must be non-negative")
        return self

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> BlockTimestamp:
        return self.start.advance(len(self) - 1)

    @property
    def has_missing(self) -> bool:
        return bool(self.missing.any())

    def timestamp_at(self, index: int) -> BlockTimestamp:
        return self.start.advance(index)

    def position(self, ts: BlockTimestamp) -> int:
        """Index of `ts` in the series; may fall outside [0, len)."""
        return ts.ordinal - self.start.ordinal

    def contains(self, ts: BlockTimestamp) -> bool:
        return 0 <= self.position(ts) < len(self)

    def value_at(self, ts: BlockTimestamp) -> Optional[float]:
        """Price at `ts`, or None when absent or masked."""
        if not self.contains(ts):
            return None
        idx = self.position(ts)
        if self.missing[idx]:
            return None
        return float(self.values[idx])

    def slice(self, start: int, stop: int) -> "PriceSeries":
        return PriceSeries(
            zone=self.zone,
            start=self.start.advance(start),
            values=self.values[start:stop],
            missing=self.missing[start:stop],
        )

    def day_matrix(self) -> np.ndarray:
        """Reshape a day-aligned series into a (days, 96) matrix."""
        if self.start.block != 1 or len(self) % BLOCKS_PER_DAY:
            raise ValueError("series is not aligned to whole days")
        return self.values.reshape(-1, BLOCKS_PER_DAY)


class DriverMatrix(BaseModel):
    """Block-indexed matrix of fundamental price drivers."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    start: BlockTimestamp
    columns: Tuple[str, ...]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        return _frozen_array(array)

    @model_validator(mode="after")
    def _check_invariants(self) -> "DriverMatrix":
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("driver column names must be unique")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError("driver values must be rows x columns")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("driver matrix contains non-finite values")
        return self

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def end(self) -> BlockTimestamp:
        return self.start.advance(len(self) - 1)

    def position(self, ts: BlockTimestamp) -> int:
        return ts.ordinal - self.start.ordinal

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"driver column '{name}' not present") from None

    def select(self, names: List[str]) -> "DriverMatrix":
        idx = [self.columns.index(n) for n in names]
        return DriverMatrix(start=self.start, columns=tuple(names), values=self.values[:, idx])

    def slice(self, start: int, stop: int) -> "DriverMatrix":
        return DriverMatrix(start=self.start.advance(start), columns=self.columns, values=self.values[start:stop])


class ModelForecast(BaseModel):
    """Day-ahead 96-block forecast of one named model."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: str
    date: dt.date
    values: np.ndarray
    variance: Optional[np.ndarray] = Field(None, description="Conditional variance path, when the model has one")

    @field_validator("values", "variance", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Any:
        return None if value is None else _frozen_array(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "ModelForecast":
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError(f"{self.model}: forecasts must be finite and non-negative")
        return self


class CombinedForecast(BaseModel):
    """Inverse-loss-weighted combination for one delivery day."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    date: dt.date
    values: np.ndarray
    weights: List[Dict[str, float]] = Field(..., description="Per-block survivor weights")

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)


class ShockEvent(BaseModel):
    """A fundamental event moving supply or demand on the exchange."""
    model_config = ConfigDict(frozen=True)

    kind: ShockKind
    start: BlockTimestamp = Field(..., description="First delivery block affected")
    duration: int = Field(..., ge=1, description="Length in blocks")
    magnitude: float = Field(..., ge=0.0, description="MW; zero-magnitude events are no-ops")


DEFAULT_DRIVER_COLUMNS = (
    "demand.N3",
    "outage_mw.central",
    "contract_delta.W2",
    "offer_mw.ipp",
    "corridor_mw",
    "ds_gap",
)


class SimConfig(BaseModel):
    """Configuration of the synthetic thin-market generator."""
    model_config = ConfigDict(extra="forbid")

    days: int = Field(..., ge=1)
    zone: Zone = Zone.N3
    seed: int = 0
    start_date: dt.date = dt.date(2016, 1, 1)
    base_price: float = Field(3.0, ge=0.0)
    seasonal_periods: Tuple[int, ...] = (96, 672, 35064)
    seasonal_amplitudes: Tuple[float, ...] = (0.6, 0.25, 0.3)
    seasonal_phases: Tuple[float, ...] = (0.0, 0.0, 0.0)
    noise_sd: float = Field(0.06, ge=0.0)
    shock_rate: float = Field(0.3, ge=0.0, description="Poisson rate of shocks per day")
    magnitude_min: float = Field(200.0, ge=0.0)
    magnitude_max: float = Field(1200.0, ge=0.0)
    duration_min: int = Field(8, ge=1)
    duration_max: int = Field(48, ge=1)
    shock_kinds: Tuple[ShockKind, ...] = tuple(ShockKind)
    volatile_share: float = Field(
        0.4, gt=0.0, le=1.0, description="Long-run share of days in the volatile regime; shocks only fall on volatile days",
    )
    spell_days: float = Field(10.0, ge=1.0, description="Mean length of a volatile spell in days")
    peak_blocks: Tuple[int, int] = Field((73, 88), description="First and last block of the evening peak")
    peak_share: float = Field(0.8, ge=0.0, le=1.0, description="Probability that a shock is confined to the peak")
    phantom_ratio: float = Field(
        0.5, ge=0.0, description="Scheduled events that never deliver, per delivered shock",
    )
    response: Dict[ShockKind, float] = Field(
        default_factory=lambda: {
            ShockKind.OUTAGE: 0.002,
            ShockKind.CONTRACT_END: -0.0015,
            ShockKind.DEMAND_SURGE: 0.002,
        },
        description="Price change per MW of active shock",
    )
    demand_base: float = 5000.0
    demand_amplitude: float = 800.0
    offer_base: float = 3000.0
    offer_amplitude: float = 300.0
    corridor_mw: float = 4000.0
    driver_noise_sd: float = Field(20.0, ge=0.0)

    @model_validator(mode="after")
    def _check_invariants(self) -> "SimConfig":
        if not (len(self.seasonal_periods) == len(self.seasonal_amplitudes) == len(self.seasonal_phases)):
            raise ValueError("seasonal periods, amplitudes and phases must have equal length")
        if any(a < 0 for a in self.seasonal_amplitudes):
            raise ValueError("seasonal amplitudes must be non-negative")
        if any(p < 1 for p in self.seasonal_periods):
            raise ValueError("seasonal periods must be positive")
        if self.magnitude_min > self.magnitude_max or self.duration_min > self.duration_max:
            raise ValueError("shock ranges must satisfy min <= max")
        if not all(np.isfinite(c) for c in self.response.values()):
            raise ValueError("response coefficients must be finite")
        lo, hi = self.peak_blocks
        if not 1 <= lo <= hi <= BLOCKS_PER_DAY:
            raise ValueError(f"peak blocks must satisfy 1 <= first <= last <= {BLOCKS_PER_DAY}")
        if self.volatile_share < 1.0 and self.volatile_share * (1.0 + self.spell_days) > self.spell_days:
            raise ValueError("volatile_share too high for spell_days: calm spells would be shorter than a day")
        return self

    @property
    def volatile_rate(self) -> float:
        """Shock rate per volatile day, keeping the long-run mean at shock_rate."""
        return self.shock_rate / self.volatile_share


class ModelSpec(BaseModel):
    """One named model variant of the registry."""
    model_config = ConfigDict(frozen=True)

    name: str
    family: ModelFamily
    model_class: ModelClass
    window_days: int = Field(..., gt=0, description="Training window in days")
    recipe: Optional[FeatureRecipe] = None
    uses_ds_gap: bool = False
    uses_ipp: bool = False
    params: Dict[str, Any] = Field(default_factory=dict, description="Estimator hyperparameters")


class McsConfig(BaseModel):
    """Model Confidence Set settings."""
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(0.10, gt=0.0, lt=1.0)
    n_bootstrap: int = Field(1000, ge=100)
    block_len: int = Field(2, ge=1)
    window_days: int = Field(10, ge=2, description="Trailing days of losses per test")
    seed: int = 0
    group_blocks: bool = Field(False, description="Pool losses over the five intraday block groups")


class BacktestPlan(BaseModel):
    """Everything a rolling day-ahead backtest needs."""
    model_config = ConfigDict(extra="forbid")

    prices_csv: Path
    drivers_csv: Optional[Path] = None
    evaluation_start: dt.date
    evaluation_end: dt.date
    models: Optional[List[str]] = Field(None, description="Registry subset; all models when omitted")
    mcs: McsConfig = Field(default_factory=McsConfig)
    output_dir: Path = Path("out")
    warmup_days: Optional[int] = Field(None, ge=0, description="Forecast days before the range that only feed losses")
    window_overrides: Dict[str, int] = Field(default_factory=dict)
    param_overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    seed: int = 0
    jobs: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_range(self) -> "BacktestPlan":
        if self.evaluation_end < self.evaluation_start:
            raise ValueError("evaluation_end precedes evaluation_start")
        if any(days <= 0 for days in self.window_overrides.values()):
            raise ValueError("window overrides must be positive")
        return self

    @property
    def effective_warmup(self) -> int:
        return self.mcs.window_days if self.warmup_days is None else self.warmup_days


class LossMatrix(BaseModel):
    """Per-model loss records over the trailing window (models x samples)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    models: Tuple[str, ...]
    days: Tuple[str, ...] = Field(..., description="Sample labels, usually ISO dates")
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "LossMatrix":
        if len(self.models) < 2:
            raise ValueError("loss matrix needs at least two models")
        if len(set(self.models)) != len(self.models):
            raise ValueError("model names must be unique")
        if self.values.shape != (len(self.models), len(self.days)) or len(self.days) < 2:
            raise ValueError("loss matrix must be models x samples with at least two samples")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("losses must be finite and non-negative")
        return self

    def mean_losses(self) -> Dict[str, float]:
        return {m: float(v) for m, v in zip(self.models, self.values.mean(axis=1))}


class SuperiorSet(BaseModel):
    """Output of the MCS procedure for one block (or block group)."""
    model_config = ConfigDict(frozen=True)

    survivors: List[str]
    pvalues: Dict[str, float] = Field(..., description="MCS p-value per model (running max)")
    elimination_order: List[str] = Field(default_factory=list)
    mean_losses: Dict[str, float] = Field(default_factory=dict)
    weights: Dict[str, float]
    alpha: float
    degenerate: bool = Field(False, description="Some statistic had zero bootstrap variance")
    fallback: bool = Field(False, description="Equal weights assigned without an MCS test")

    @model_validator(mode="after")
    def _check_invariants(self) -> "SuperiorSet":
        if not self.survivors:
            raise ValueError("superior set cannot be empty")
        if set(self.weights) != set(self.survivors):
            raise ValueError("weights must cover exactly the survivors")
        if any(w < 0 or w > 1 for w in self.weights.values()):
            raise ValueError("weights must lie in [0, 1]")
        if abs(sum(self.weights.values()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        return self


class SsmReportRow(BaseModel):
    """One row of the superior-set report."""
    date: dt.date
    block: int
    model: str
    mcs_pvalue: float
    mean_loss: Optional[float] = None
    weight: float = 0.0
    eliminated_at: Optional[int] = Field(None, description="Elimination step; None for survivors")


class ModelFailure(BaseModel):
    """A model excluded from one backtest day."""
    date: dt.date
    model: str
    reason: str


class BacktestRecord(BaseModel):
    """Everything recorded for one evaluated (date, block)."""
    date: dt.date
    block: int = Field(..., ge=1, le=BLOCKS_PER_DAY)
    actual: float
    forecasts: Dict[str, float]
    combined: float
    ssm: List[str]
    weights: Dict[str, float]
    lag_diff: Optional[float] = None
    fallback: bool = Field(False, description="Weights are the untested equal-weight fallback")


class BacktestResult(BaseModel):
    """Full output of a rolling backtest."""
    zone: Zone
    records: List[BacktestRecord] = Field(default_factory=list)
    model_classes: Dict[str, ModelClass] = Field(default_factory=dict)
    skipped: Dict[str, str] = Field(default_factory=dict, description="Models skipped for infeasible windows")
    failures: List[ModelFailure] = Field(default_factory=list)
    selections: List[SsmReportRow] = Field(default_factory=list)
