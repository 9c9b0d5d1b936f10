"""Single-hidden-layer tanh network trained by full-batch gradient descent."""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import FitError
from src.kernel_ml.features import DesignMatrix

logger = logging.getLogger(__name__)


class AnnConfig(BaseModel):
    """Network and training settings."""
    model_config = ConfigDict(extra="forbid")

    hidden: int = Field(10, ge=1)
    epochs: int = Field(500, ge=1)
    learning_rate: float = Field(0.01, gt=0.0)
    lr_growth: float = Field(1.05, ge=1.0, description="Step-size growth after an accepted epoch")
    seed: int = 0


class AnnModel(BaseModel):
    """Trained network; predicts standardized targets, reported de-standardized."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    target_mean: float = 0.0
    target_sd: float = Field(1.0, gt=0.0)
    epochs: int = 0
    learning_rate: float = 0.0
    seed: int = 0
    loss_trace: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_invariants(self) -> "AnnModel":
        if self.W1.ndim != 2 or self.W1.shape[0] < 1:
            raise ValueError("network needs at least one hidden unit")
        if self.b1.shape != (self.W1.shape[0],) or self.w2.shape != (self.W1.shape[0],):
            raise ValueError("parameter shapes disagree with hidden width")
        if not all(np.all(np.isfinite(a)) for a in (self.W1, self.b1, self.w2, np.array([self.b2]))):
            raise ValueError("network parameters must be finite")
        return self

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])


def pack(W1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: float) -> np.ndarray:
    return np.concatenate([W1.ravel(), b1, w2, [b2]])


def unpack(theta: np.ndarray, hidden: int, features: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    split = hidden * features
    W1 = theta[:split].reshape(hidden, features)
    b1 = theta[split:split + hidden]
    w2 = theta[split + hidden:split + 2 * hidden]
    return W1, b1, w2, float(theta[-1])


def loss_and_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray, hidden: int) -> Tuple[float, np.ndarray]:
    """Mean squared error and its analytic gradient w.r.t. the packed parameters."""
    n, f = X.shape
    W1, b1, w2, b2 = unpack(theta, hidden, f)
    H = np.tanh(X @ W1.T + b1)
    residual = H @ w2 + b2 - y
    loss = float(residual @ residual) / n
    g_out = 2.0 * residual / n
    g_w2 = H.T @ g_out
    g_b2 = g_out.sum()
    g_pre = np.outer(g_out, w2) * (1.0 - H ** 2)
    g_W1 = g_pre.T @ X
    g_b1 = g_pre.sum(axis=0)
    return loss, pack(g_W1, g_b1, g_w2, g_b2)


class AnnTrainer:
    """Gradient descent with step halving on loss increase."""

    def __init__(self, config: Optional[AnnConfig] = None):
        self.config = config or AnnConfig()

    def fit(self, X: DesignMatrix) -> AnnModel:
        """Train on the standardized rows and targets of `X`.

        Raises:
            FitError: on an empty design or a non-finite loss
        """
        if X.rows.shape[0] == 0:
            raise FitError("empty design matrix")
        cfg = self.config
        rows, y = X.rows, X.standardized_targets()
        n, f = rows.shape
        rng = np.random.default_rng(cfg.seed)
        bound = 1.0 / np.sqrt(max(f, 1))
        theta = pack(
            rng.uniform(-bound, bound, (cfg.hidden, f)),
            rng.uniform(-bound, bound, cfg.hidden),
            rng.uniform(-bound, bound, cfg.hidden),
            float(rng.uniform(-bound, bound)),
        )

        lr = cfg.learning_rate
        loss, grad = loss_and_grad(theta, rows, y, cfg.hidden)
        trace = [loss]
        for epoch in range(1, cfg.epochs + 1):
            candidate = theta - lr * grad
            new_loss, new_grad = loss_and_grad(candidate, rows, y, cfg.hidden)
            if not np.isfinite(new_loss):
                raise FitError(f"non-finite training loss at epoch {epoch}")
            if new_loss > loss:
                lr *= 0.5
            else:
                theta, loss, grad = candidate, new_loss, new_grad
                lr *= cfg.lr_growth
            trace.append(loss)

        if trace[-1] > trace[0]:
            raise FitError("training loss increased end to end")
        W1, b1, w2, b2 = unpack(theta, cfg.hidden, f)
        logger.debug("ANN trained: loss %.6g -> %.6g", trace[0], trace[-1])
        return AnnModel(
            W1=W1, b1=b1, w2=w2, b2=b2,
            target_mean=X.target_mean,
            target_sd=X.target_sd,
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            seed=cfg.seed,
            loss_trace=trace,
        )

    def predict(self, model: AnnModel, rows: np.ndarray, floor: bool = True) -> np.ndarray:
        """Forward pass on standardized rows, de-standardized."""
        rows = np.asarray(rows, dtype=float)
        if rows.shape[0] == 0:
            return np.zeros(0)
        out = np.tanh(rows @ model.W1.T + model.b1) @ model.w2 + model.b2
        values = model.target_mean + model.target_sd * out
        if not np.all(np.isfinite(values)):
            raise FitError("ANN prediction is not finite")
        return np.maximum(values, 0.0) if floor else values


def fit_ann(X: DesignMatrix, config: Optional[AnnConfig] = None) -> AnnModel:
    """Convenience function to train a network."""
    return AnnTrainer(config).fit(X)


def predict_ann(model: AnnModel, rows: np.ndarray, floor: bool = True) -> np.ndarray:
    """Convenience function for network forecasts."""
    return AnnTrainer().predict(model, rows, floor)
