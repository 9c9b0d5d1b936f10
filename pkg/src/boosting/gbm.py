"""Squared-loss gradient boosting of regression trees."""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.boosting.tree import RegressionTree, TreeBuilder, TreeConfig
from src.errors import FitError

logger = logging.getLogger(__name__)

PRICE_MODEL_TREES = 5000
SPECF1_TREES = 6000


class GbmConfig(BaseModel):
    """Boosting settings; tree counts per named variant live in the registry."""
    model_config = ConfigDict(extra="forbid")

    n_trees: int = Field(100, ge=1)
    shrinkage: float = Field(0.05, gt=0.0, le=1.0)
    max_depth: int = Field(3, ge=0)
    min_leaf: int = Field(10, ge=1)


class GbmModel(BaseModel):
    """F(x) = f0 + shrinkage * sum of tree outputs."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f0: float
    trees: List[RegressionTree] = Field(default_factory=list)
    shrinkage: float = Field(..., ge=0.0, le=1.0)
    loss_trace: List[float] = Field(default_factory=list, description="Training MSE, entry 0 is the constant model")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


class GradientBooster:
    """Residual boosting; the boosting loop is sequential."""

    def __init__(self, config: Optional[GbmConfig] = None):
        self.config = config or GbmConfig()

    def fit(self, X: np.ndarray, y: np.ndarray) -> GbmModel:
        """Fit M trees to successive residuals.

        Raises:
            FitError: on empty input, non-finite residuals, or a loss increase
        """
        cfg = self.config
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.size:
            raise FitError("boosting needs a non-empty feature matrix matching the targets")
        order = np.argsort(X, axis=0, kind="stable")
        builder = TreeBuilder(TreeConfig(max_depth=cfg.max_depth, min_leaf=cfg.min_leaf))

        f0 = float(y.mean())
        F = np.full(y.size, f0)
        residual = y - F
        trace = [float(residual @ residual) / y.size]
        trees: List[RegressionTree] = []
        for m in range(cfg.n_trees):
            if not np.all(np.isfinite(residual)):
                raise FitError(f"non-finite residual at iteration {m}")
            tree = builder.fit(X, residual, order)
            trees.append(tree)
            F += cfg.shrinkage * tree.predict(X)
            residual = y - F
            loss = float(residual @ residual) / y.size
            if loss > trace[-1] + 1e-12 * trace[0]:
                raise FitError(f"training loss increased at iteration {m + 1}")
            trace.append(loss)
        logger.debug("GBM %d trees: mse %.6g -> %.6g", cfg.n_trees, trace[0], trace[-1])
        return GbmModel(f0=f0, trees=trees, shrinkage=cfg.shrinkage, loss_trace=trace)

    def predict(self, model: GbmModel, X: np.ndarray, floor: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], model.f0)
        for tree in model.trees:
            out += model.shrinkage * tree.predict(X)
        if not np.all(np.isfinite(out)):
            raise FitError("GBM prediction is not finite")
        return np.maximum(out, 0.0) if floor else out


def fit_gbm(X: np.ndarray, y: np.ndarray, config: Optional[GbmConfig] = None) -> GbmModel:
    """Convenience function to fit a boosted ensemble."""
    return GradientBooster(config).fit(X, y)


def predict_gbm(model: GbmModel, X: np.ndarray, floor: bool = True) -> np.ndarray:
    """Convenience function for boosted forecasts."""
    return GradientBooster().predict(model, X, floor)
