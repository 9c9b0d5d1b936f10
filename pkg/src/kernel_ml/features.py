"""Design matrices for the kernel and tree learners.

Lags are taken at the same block on the three previous days. A training
window of W whole days yields (W - 3) x 96 samples plus the 96 query rows
of the day after the window.
"""

import datetime as dt
import logging
from typing import AbstractSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import InsufficientHistoryError, WindowError
from src.models import BLOCKS_PER_DAY, FeatureRecipe, PriceSeries

logger = logging.getLogger(__name__)

N_LAGS = 3
STANDARDIZE_TOL = 1e-10


class DesignMatrix(BaseModel):
    """Standardized features with the statistics needed to reuse them."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rows: np.ndarray = Field(..., description="Standardized training features (samples x features)")
    targets: np.ndarray = Field(..., description="Training prices")
    feature_names: Tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    query: Optional[np.ndarray] = Field(None, description="Standardized rows of the forecast day")
    query_date: Optional[dt.date] = None
    dropped: Tuple[str, ...] = Field((), description="Zero-variance columns removed")

    @model_validator(mode="after")
    def _check_invariants(self) -> "DesignMatrix":
        if self.rows.ndim != 2 or self.rows.shape[0] != self.targets.size:
            raise ValueError("rows and targets must have equal length")
        if self.rows.shape[1] != len(self.feature_names):
            raise ValueError("feature names must match columns")
        if not (np.all(np.isfinite(self.rows)) and np.all(np.isfinite(self.targets))):
            raise ValueError("design matrix contains non-finite cells")
        if np.any(self.sds <= 0):
            raise ValueError("every retained column needs sd > 0")
        return self

    @property
    def target_mean(self) -> float:
        return float(self.targets.mean()) if self.targets.size else 0.0

    @property
    def target_sd(self) -> float:
        sd = float(self.targets.std()) if self.targets.size else 0.0
        return sd if sd > 0 else 1.0

    def standardized_targets(self) -> np.ndarray:
        return (self.targets - self.target_mean) / self.target_sd

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.means) / self.sds


def block_effect(blocks: np.ndarray) -> np.ndarray:
    """One sin/cos pair per block index 1..96."""
    angle = 2.0 * np.pi * np.asarray(blocks, dtype=float) / BLOCKS_PER_DAY
    return np.column_stack([np.sin(angle), np.cos(angle)])


class FeatureBuilder:
    """Builds lag, gap, factor and calendar features for one training window."""

    def __init__(
        self,
        recipe: FeatureRecipe = FeatureRecipe.NODS,
        block_effect: Optional[bool] = None,
        day_effect: bool = False,
        include_ds_gap: Optional[bool] = None,
        holidays: Optional[AbstractSet[dt.date]] = None,
    ):
        self.recipe = recipe
        self.block_effect = recipe == FeatureRecipe.DS if block_effect is None else block_effect
        self.include_ds_gap = recipe == FeatureRecipe.DS if include_ds_gap is None else include_ds_gap
        self.day_effect = day_effect
        self.holidays = holidays

    def build(
        self,
        series: PriceSeries,
        ds_gap: Optional[np.ndarray] = None,
        factors: Optional[np.ndarray] = None,
        with_query: bool = True,
    ) -> DesignMatrix:
        """Build the design matrix for a day-aligned training window.

        Args:
            series: Training window of whole days
            ds_gap: Driver gap aligned with `series` (row t known at t for delivery t + 96)
            factors: PCA factor scores aligned with `series` (rows x k)
            with_query: Also build the rows of the day after the window

        Returns:
            DesignMatrix with standardized columns
        """
        if series.start.block != 1 or len(series) % BLOCKS_PER_DAY:
            raise WindowError("feature windows must consist of whole days")
        days = len(series) // BLOCKS_PER_DAY
        if days <= N_LAGS:
            raise InsufficientHistoryError(f"need more than {N_LAGS} days for lag features, got {days}")
        prices = series.day_matrix()
        if np.isnan(prices).any():
            raise WindowError("missing lags or targets inside the training window")
        if self.include_ds_gap and (ds_gap is None or len(ds_gap) != len(series)):
            raise WindowError("ds recipe needs a ds_gap column aligned with the window")
        if self.recipe == FeatureRecipe.PCA and (factors is None or len(factors) != len(series)):
            raise WindowError("pca recipe needs factor scores aligned with the window")

        target_days = list(range(N_LAGS, days)) + ([days] if with_query else [])
        columns: List[np.ndarray] = []
        names: List[str] = []
        blocks = np.tile(np.arange(1, BLOCKS_PER_DAY + 1), len(target_days))
        previous = np.repeat(np.array(target_days) - 1, BLOCKS_PER_DAY)

        for lag in range(1, N_LAGS + 1):
            columns.append(prices[np.array(target_days) - lag].ravel())
            names.append(f"lag{lag}")
        if self.include_ds_gap:
            gap = np.asarray(ds_gap, dtype=float).reshape(days, BLOCKS_PER_DAY)
            columns.append(gap[previous, blocks - 1])
            names.append("ds_gap")
        if self.recipe == FeatureRecipe.PCA:
            scores = np.asarray(factors, dtype=float).reshape(days, BLOCKS_PER_DAY, -1)
            for k in range(scores.shape[2]):
                columns.append(scores[previous, blocks - 1, k])
                names.append(f"factor{k + 1}")
        if self.block_effect:
            effect = block_effect(blocks)
            columns.extend([effect[:, 0], effect[:, 1]])
            names.extend(["block_sin", "block_cos"])
        if self.day_effect:
            dates = [series.start.date + dt.timedelta(days=d) for d in target_days]
            columns.append(np.repeat([float(d.weekday()) for d in dates], BLOCKS_PER_DAY))
            names.append("day_of_week")
            if self.holidays is not None:
                columns.append(np.repeat([float(d in self.holidays) for d in dates], BLOCKS_PER_DAY))
                names.append("holiday")

        raw = np.column_stack(columns)
        n_train = (days - N_LAGS) * BLOCKS_PER_DAY
        train, query = raw[:n_train], (raw[n_train:] if with_query else None)
        targets = prices[N_LAGS:].ravel()
        return self._standardize(train, targets, query, names, series.start.date + dt.timedelta(days=days))

    def _standardize(
        self,
        train: np.ndarray,
        targets: np.ndarray,
        query: Optional[np.ndarray],
        names: List[str],
        query_date: dt.date,
    ) -> DesignMatrix:
        means = train.mean(axis=0)
        sds = train.std(axis=0)
        keep = sds > STANDARDIZE_TOL * (np.abs(means) + 1.0)
        dropped = tuple(n for n, k in zip(names, keep) if not k)
        if dropped:
            logger.warning("dropping zero-variance feature columns: %s", ", ".join(dropped))
        means, sds = means[keep], sds[keep]
        rows = (train[:, keep] - means) / sds
        standardized_query = None if query is None else (query[:, keep] - means) / sds
        return DesignMatrix(
            rows=rows,
            targets=targets,
            feature_names=tuple(n for n, k in zip(names, keep) if k),
            means=means,
            sds=sds,
            query=standardized_query,
            query_date=query_date if query is not None else None,
            dropped=dropped,
        )


def build_features(
    series: PriceSeries,
    recipe: FeatureRecipe,
    ds_gap: Optional[np.ndarray] = None,
    factors: Optional[np.ndarray] = None,
    **options,
) -> DesignMatrix:
    """Convenience function to build a design matrix for one recipe."""
    return FeatureBuilder(recipe, **options).build(series, ds_gap=ds_gap, factors=factors)
