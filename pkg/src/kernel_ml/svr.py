"""Epsilon-insensitive support-vector regression solved by SMO.

The dual is written over 2n variables (alpha, alpha*) with labels +1/-1 and
solved with maximal-violating-pair working sets and second-order selection
of the partner variable, as in LIBSVM.
"""

import logging
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import FitError
from src.kernel_ml.features import DesignMatrix

logger = logging.getLogger(__name__)

TAU = 1e-12


class Kernel(str, Enum):
    RADIAL = "radial"
    LINEAR = "linear"


class SvrConfig(BaseModel):
    """SVR hyperparameters; gamma defaults to 1/features."""
    model_config = ConfigDict(extra="forbid")

    kernel: Kernel = Kernel.RADIAL
    C: float = Field(1.0, gt=0.0)
    epsilon: float = Field(0.1, ge=0.0)
    gamma: Optional[float] = Field(None, gt=0.0)
    tol: float = Field(1e-3, gt=0.0)
    max_iter: int = Field(100_000, ge=1)


class SvrModel(BaseModel):
    """Trained SVR: f(x) = sum_i coef_i K(sv_i, x) + bias on standardized targets."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: Kernel
    gamma: float = Field(..., gt=0.0)
    C: float = Field(..., gt=0.0)
    epsilon: float = Field(..., ge=0.0)
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    target_mean: float = 0.0
    target_sd: float = Field(1.0, gt=0.0)
    kkt_gap: float = 0.0
    iterations: int = 0
    converged: bool = Field(True, description="False when max_iter stopped the solver early")

    @model_validator(mode="after")
    def _check_invariants(self) -> "SvrModel":
        if self.dual_coef.size != self.support_vectors.shape[0]:
            raise ValueError("one dual coefficient per support vector")
        if np.any(np.abs(self.dual_coef) > self.C * (1.0 + 1e-12)):
            raise ValueError("dual coefficients must lie in [-C, C]")
        return self

    @property
    def weight_vector(self) -> np.ndarray:
        """Primal weights of a linear-kernel model."""
        if self.kernel != Kernel.LINEAR:
            raise ValueError("weight vector exists only for the linear kernel")
        return self.dual_coef @ self.support_vectors


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: Kernel, gamma: float) -> np.ndarray:
    if kernel == Kernel.LINEAR:
        return A @ B.T
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SmoSolver:
    """Solves min 1/2 a'Qa + p'a s.t. y'a = 0, 0 <= a <= C."""

    def __init__(self, K: np.ndarray, targets: np.ndarray, C: float, epsilon: float):
        n = targets.size
        self.n = n
        self.C = C
        self.K = K
        self.y = np.r_[np.ones(n), -np.ones(n)]
        self.p = np.r_[epsilon - targets, epsilon + targets]
        self.QD = np.r_[np.diag(K), np.diag(K)]
        self.alpha = np.zeros(2 * n)
        self.G = self.p.copy()

    def q_row(self, i: int) -> np.ndarray:
        k = self.K[i % self.n]
        return self.y[i] * self.y * np.r_[k, k]

    def select_working_set(self, tol: float):
        y, G, a, C = self.y, self.G, self.alpha, self.C
        up = np.where(y > 0, a < C, a > 0)
        low = np.where(y > 0, a > 0, a < C)
        score_up = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(score_up))
        g_max = score_up[i]
        score_low = np.where(low, y * G, -np.inf)
        g_max2 = float(np.max(score_low)) if low.any() else -np.inf
        gap = g_max + g_max2
        if not np.isfinite(g_max) or gap < tol:
            return None, None, gap

        Q_i = self.q_row(i)
        grad_diff = g_max + y * G
        quad = self.QD[i] + self.QD - 2.0 * y[i] * y * Q_i
        quad = np.where(quad > 0, quad, TAU)
        candidate = low & (grad_diff > 0)
        if not candidate.any():
            return None, None, gap
        obj = np.where(candidate, -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(obj))
        return i, j, gap

    def update(self, i: int, j: int) -> None:
        a, y, G, C = self.alpha, self.y, self.G, self.C
        Q_i, Q_j = self.q_row(i), self.q_row(j)
        old_i, old_j = a[i], a[j]
        if y[i] != y[j]:
            quad = self.QD[i] + self.QD[j] + 2.0 * Q_i[j]
            delta = (-G[i] - G[j]) / (quad if quad > 0 else TAU)
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > 0:
                if a[i] > C:
                    a[i], a[j] = C, C - diff
            elif a[j] > C:
                a[j], a[i] = C, C + diff
        else:
            quad = self.QD[i] + self.QD[j] - 2.0 * Q_i[j]
            delta = (G[i] - G[j]) / (quad if quad > 0 else TAU)
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i], a[j] = C, total - C
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > C:
                if a[j] > C:
                    a[j], a[i] = C, total - C
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        G += Q_i * (a[i] - old_i) + Q_j * (a[j] - old_j)

    def rho(self) -> float:
        y, G, a, C = self.y, self.G, self.alpha, self.C
        yG = y * G
        at_upper = a >= C
        at_lower = a <= 0
        free = ~(at_upper | at_lower)
        if free.any():
            return float(yG[free].mean())
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        return float((ub + lb) / 2.0)


class SvrTrainer:
    """Fits and evaluates SVR models on design matrices."""

    def __init__(self, config: Optional[SvrConfig] = None):
        self.config = config or SvrConfig()

    def fit(self, X: DesignMatrix) -> SvrModel:
        cfg = self.config
        rows, targets = X.rows, X.standardized_targets()
        if rows.shape[0] == 0:
            raise FitError("empty design matrix")
        gamma = cfg.gamma or 1.0 / max(rows.shape[1], 1)
        solver = SmoSolver(kernel_matrix(rows, rows, cfg.kernel, gamma), targets, cfg.C, cfg.epsilon)

        iterations, converged, gap = 0, False, np.inf
        while iterations < cfg.max_iter:
            i, j, gap = solver.select_working_set(cfg.tol)
            if i is None:
                converged = True
                break
            solver.update(i, j)
            iterations += 1
        if not converged:
            _, _, gap = solver.select_working_set(cfg.tol)
            logger.warning("SVR stopped after %d iterations with KKT gap %.3g", iterations, gap)

        n = targets.size
        alpha = np.clip(solver.alpha, 0.0, cfg.C)
        coef = alpha[:n] - alpha[n:]
        active = coef != 0.0
        return SvrModel(
            kernel=cfg.kernel,
            gamma=gamma,
            C=cfg.C,
            epsilon=cfg.epsilon,
            support_vectors=rows[active],
            dual_coef=coef[active],
            bias=-solver.rho(),
            target_mean=X.target_mean,
            target_sd=X.target_sd,
            kkt_gap=float(max(gap, 0.0)),
            iterations=iterations,
            converged=converged,
        )

    def predict(self, model: SvrModel, rows: np.ndarray, floor: bool = True) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.shape[0] == 0:
            return np.zeros(0)
        if model.dual_coef.size:
            out = kernel_matrix(rows, model.support_vectors, model.kernel, model.gamma) @ model.dual_coef
        else:
            out = np.zeros(rows.shape[0])
        values = model.target_mean + model.target_sd * (out + model.bias)
        if not np.all(np.isfinite(values)):
            raise FitError("SVR prediction is not finite")
        return np.maximum(values, 0.0) if floor else values


def fit_svr(X: DesignMatrix, config: Optional[SvrConfig] = None) -> SvrModel:
    """Convenience function to fit an SVR."""
    return SvrTrainer(config).fit(X)


def predict_svr(model: SvrModel, rows: np.ndarray, floor: bool = True) -> np.ndarray:
    """Convenience function for SVR forecasts."""
    return SvrTrainer().predict(model, rows, floor)
