"""Regression trees grown by exact greedy SSE splits.

Nodes are stored in parallel arrays; `feature == -1` marks a leaf. A sample
goes left when ``x[feature] < threshold``.
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import FitError

LEAF = -1


class TreeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_depth: int = Field(3, ge=0)
    min_leaf: int = Field(10, ge=1)


class RegressionTree(BaseModel):
    """Binary regression tree in array form."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int
    min_leaf: int

    @model_validator(mode="after")
    def _check_invariants(self) -> "RegressionTree":
        internal = self.feature != LEAF
        if np.any(internal & ((self.left < 0) | (self.right < 0))):
            raise ValueError("every internal node needs two children")
        return self

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] < self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    order: np.ndarray,
    members: np.ndarray,
    min_leaf: int,
) -> Optional[Tuple[int, float, float]]:
    """Highest-gain split of the samples flagged in `members`.

    Ties keep the lowest feature index, then the lowest threshold.
    """
    n = int(members.sum())
    if n < 2:
        return None
    total = y[members].sum()
    # one row per feature: member indices in ascending feature order
    by_feature = order.T
    idx = by_feature[members[by_feature]].reshape(X.shape[1], n)
    xs = np.take_along_axis(X.T, idx, axis=1)
    left_sum = np.cumsum(y[idx], axis=1)[:, :-1]
    n_left = np.arange(1, n)
    sizes_ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    valid = (xs[:, :-1] < xs[:, 1:]) & sizes_ok
    if not valid.any():
        return None
    right_sum = total - left_sum
    gain = left_sum ** 2 / n_left + right_sum ** 2 / (n - n_left) - total ** 2 / n
    gain = np.where(valid, gain, -np.inf)
    # row-major argmax keeps the first feature, then the first threshold, among ties
    f, k = np.unravel_index(int(np.argmax(gain)), gain.shape)
    lo, hi = xs[f, k], xs[f, k + 1]
    threshold = (lo + hi) / 2.0
    if threshold <= lo:
        threshold = hi
    return int(f), float(threshold), float(gain[f, k])


class TreeBuilder:
    """Depth-first exact greedy tree growth."""

    def __init__(self, config: Optional[TreeConfig] = None):
        self.config = config or TreeConfig()

    def fit(self, X: np.ndarray, y: np.ndarray, order: Optional[np.ndarray] = None) -> RegressionTree:
        """Grow a tree on (X, y).

        Args:
            X: Feature rows
            y: Targets
            order: Per-feature stable argsort of X, reused across boosting rounds
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.size:
            raise FitError("tree needs a non-empty feature matrix matching the targets")
        if order is None:
            order = np.argsort(X, axis=0, kind="stable")
        cfg = self.config
        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        value: List[float] = []

        def new_node(members: np.ndarray) -> int:
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[members].mean()))
            return len(feature) - 1

        stack = [(new_node(np.ones(y.size, dtype=bool)), np.ones(y.size, dtype=bool), 0)]
        while stack:
            node, members, depth = stack.pop()
            n = int(members.sum())
            if depth >= cfg.max_depth or n < 2 * cfg.min_leaf:
                continue
            node_y = y[members]
            sse = float(np.sum((node_y - node_y.mean()) ** 2))
            if sse <= 0.0:
                continue
            split = _best_split(X, y, order, members, cfg.min_leaf)
            if split is None or split[2] <= 1e-12 * sse:
                continue
            f, t, _ = split
            goes_left = members & (X[:, f] < t)
            goes_right = members & ~goes_left
            feature[node], threshold[node] = f, t
            left[node] = new_node(goes_left)
            right[node] = new_node(goes_right)
            stack.append((right[node], goes_right, depth + 1))
            stack.append((left[node], goes_left, depth + 1))

        return RegressionTree(
            feature=np.array(feature, dtype=int),
            threshold=np.array(threshold),
            left=np.array(left, dtype=int),
            right=np.array(right, dtype=int),
            value=np.array(value),
            max_depth=cfg.max_depth,
            min_leaf=cfg.min_leaf,
        )


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int = 3, min_leaf: int = 10) -> RegressionTree:
    """Convenience function to grow one tree."""
    return TreeBuilder(TreeConfig(max_depth=max_depth, min_leaf=min_leaf)).fit(X, y)


def predict_tree(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    return tree.predict(X)
