"""Driver screening and correlation PCA for the detailed multivariate models."""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import DegenerateInputError, FitError, WindowError
from src.models import BLOCKS_PER_DAY, BlockTimestamp, DriverMatrix
from src.series.windows import driver_window

logger = logging.getLogger(__name__)

IPP_PREFIX = "offer_mw.ipp"
DROP_REPORT_HEADER = ["column", "reason", "trailing_sd"]


class DroppedColumn(BaseModel):
    column: str
    reason: str
    trailing_sd: float


class ScreenResult(BaseModel):
    """Columns kept by the variance screen plus the drop report."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: DriverMatrix
    dropped: List[DroppedColumn] = Field(default_factory=list)


class PcaModel(BaseModel):
    """Correlation-matrix PCA; loadings hold every component, the first k are retained."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    columns: Tuple[str, ...]
    loadings: np.ndarray
    eigenvalues: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    k: int = Field(..., ge=1)
    variance_target: float = 0.80

    @model_validator(mode="after")
    def _check_invariants(self) -> "PcaModel":
        c = len(self.columns)
        if self.loadings.shape != (c, c) or self.eigenvalues.shape != (c,):
            raise ValueError("loadings must be columns x columns")
        gram = self.loadings.T @ self.loadings
        if np.max(np.abs(gram - np.eye(c))) >= 1e-8:
            raise ValueError("loadings are not orthonormal")
        if np.any(np.diff(self.eigenvalues) > 0) or np.any(self.eigenvalues < 0):
            raise ValueError("eigenvalues must be non-negative and descending")
        ratio = self.cumulative_ratio
        if ratio[self.k - 1] < self.variance_target - 1e-12:
            raise ValueError("retained components explain too little variance")
        if self.k > 1 and ratio[self.k - 2] >= self.variance_target - 1e-12:
            raise ValueError("k is not minimal")
        return self

    @property
    def cumulative_ratio(self) -> np.ndarray:
        return np.cumsum(self.eigenvalues) / self.eigenvalues.sum()

    @property
    def retained(self) -> np.ndarray:
        return self.loadings[:, : self.k]


def variance_screen(matrix: DriverMatrix, window_days: int = 30, threshold: float = 1e-3) -> ScreenResult:
    """Drop columns with no significant variation over the trailing window.

    Raises:
        WindowError: if the matrix is shorter than the window
        FitError: if every column is dropped
    """
    rows = window_days * BLOCKS_PER_DAY
    if len(matrix) < rows:
        raise WindowError(f"variance screen needs {window_days} days of drivers, got {len(matrix) / BLOCKS_PER_DAY:.1f}")
    trailing = matrix.values[-rows:]
    sds = trailing.std(axis=0, ddof=1)
    means = trailing.mean(axis=0)
    keep, dropped = [], []
    for name, sd, mean in zip(matrix.columns, sds, means):
        if sd < threshold * (abs(mean) + 1.0):
            dropped.append(DroppedColumn(column=name, reason=f"static over trailing {window_days} days", trailing_sd=float(sd)))
        else:
            keep.append(name)
    if not keep:
        raise FitError("variance screen dropped every driver column")
    if dropped:
        logger.info("variance screen dropped %s", ", ".join(d.column for d in dropped))
    return ScreenResult(matrix=matrix.select(keep), dropped=dropped)


def write_drop_report(dropped: List[DroppedColumn], path: Path) -> None:
    frame = pd.DataFrame([d.model_dump() for d in dropped], columns=DROP_REPORT_HEADER)
    frame.to_csv(path, index=False, lineterminator="\n")


def jacobi_eigh(A: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns unsorted eigenvalues and the matching eigenvector columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A ** 2) - np.sum(np.diag(A) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * col_p - s * col_q, s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * row_p - s * row_q, s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p, v_q = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * v_p - s * v_q, s * v_p + c * v_q
    else:
        logger.warning("Jacobi eigensolver hit %d sweeps", max_sweeps)
    return np.diag(A).copy(), V


def standardize_columns(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column means and sds (ddof=0; zero sd replaced by 1) plus the standardized matrix."""
    means = values.mean(axis=0)
    sds = values.std(axis=0)
    sds = np.where(sds > 0, sds, 1.0)
    return (values - means) / sds, means, sds


def pca_fit(matrix: DriverMatrix, variance_target: float = 0.80) -> PcaModel:
    """PCA of the correlation matrix, keeping the fewest components reaching the target."""
    rows, cols = matrix.values.shape
    if cols < 1:
        raise FitError("PCA needs at least one driver column")
    if rows < cols + 1:
        raise FitError(f"PCA needs at least {cols + 1} rows, got {rows}")
    Z, means, sds = standardize_columns(matrix.values)
    corr = Z.T @ Z / rows
    corr = (corr + corr.T) / 2.0
    if np.trace(corr) <= 0:
        raise DegenerateInputError("driver matrix has zero total variance")

    values, vectors = jacobi_eigh(corr)
    order = np.argsort(-values, kind="stable")
    values = np.maximum(values[order], 0.0)
    vectors = vectors[:, order]
    for j in range(cols):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]
    ratio = np.cumsum(values) / values.sum()
    k = int(np.argmax(ratio >= variance_target - 1e-12)) + 1
    return PcaModel(
        columns=matrix.columns,
        loadings=vectors,
        eigenvalues=values,
        means=means,
        sds=sds,
        k=k,
        variance_target=variance_target,
    )


def pca_project(model: PcaModel, matrix: DriverMatrix) -> np.ndarray:
    """Scores of the retained components (rows x k)."""
    if tuple(matrix.columns) != tuple(model.columns):
        raise ValueError(f"column mismatch: fitted {model.columns}, got {matrix.columns}")
    return ((matrix.values - model.means) / model.sds) @ model.retained


class DriverFactors(BaseModel):
    """Factor scores aligned with a training window."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scores: np.ndarray
    model: PcaModel
    dropped: List[DroppedColumn]


class DriverPipeline:
    """Screen the trailing drivers, then fit and project PCA on the training window."""

    def __init__(self, screen_days: int = 30, threshold: float = 1e-3, variance_target: float = 0.80):
        self.screen_days = screen_days
        self.threshold = threshold
        self.variance_target = variance_target

    def factors(
        self,
        drivers: DriverMatrix,
        end: BlockTimestamp,
        window_days: int,
        include_ipp: bool,
        exclude: Optional[List[str]] = None,
    ) -> DriverFactors:
        """Factor scores for the `window_days` ending at `end`.

        Columns named with the IPP prefix take part only when `include_ipp`.
        """
        names = [
            c for c in drivers.columns
            if (include_ipp or not c.startswith(IPP_PREFIX)) and c not in (exclude or [])
        ]
        if not names:
            raise FitError("no driver columns available for PCA")
        history = driver_window(drivers.select(names), end, max(self.screen_days, window_days))
        screened = variance_screen(history, self.screen_days, self.threshold)
        training = screened.matrix.slice(len(history) - window_days * BLOCKS_PER_DAY, len(history))
        model = pca_fit(training, self.variance_target)
        return DriverFactors(scores=pca_project(model, training), model=model, dropped=screened.dropped)
