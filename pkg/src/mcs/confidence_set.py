"""Model Confidence Set selection and inverse-loss forecast combination.

The equal-predictive-ability test uses the T_max statistic over mean loss
differentials against the cross-model average, with standard errors and the
null distribution taken from one moving-block bootstrap per run.
"""

import datetime as dt
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.models import BLOCKS_PER_DAY, CombinedForecast, LossMatrix, McsConfig, ModelForecast, SuperiorSet

logger = logging.getLogger(__name__)

BLOCK_GROUPS: Tuple[Tuple[int, int], ...] = ((1, 20), (21, 40), (41, 60), (61, 72), (73, 96))


def block_group(block: int) -> int:
    """Index of the intraday range containing `block`."""
    for g, (lo, hi) in enumerate(BLOCK_GROUPS):
        if lo <= block <= hi:
            return g
    raise ValueError(f"block {block} outside 1..{BLOCKS_PER_DAY}")


class EpaStatistics(BaseModel):
    """Per-model statistics of one EPA test."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    dbar: np.ndarray
    se: np.ndarray
    t: np.ndarray
    T: float
    degenerate: bool = False


def moving_block_indices(n: int, block_len: int, n_bootstrap: int, rng: np.random.Generator) -> np.ndarray:
    """Circular moving-block resamples of range(n), shape (n_bootstrap, n)."""
    block_len = min(block_len, n)
    n_blocks = -(-n // block_len)
    starts = rng.integers(0, n, size=(n_bootstrap, n_blocks))
    offsets = np.arange(block_len)
    indices = (starts[:, :, None] + offsets[None, None, :]) % n
    return indices.reshape(n_bootstrap, -1)[:, :n]


def loss_differentials(values: np.ndarray) -> np.ndarray:
    """d[i, t] = L[i, t] - mean_j L[j, t]."""
    return values - values.mean(axis=0, keepdims=True)


def _statistics(values: np.ndarray, indices: np.ndarray) -> Tuple[EpaStatistics, np.ndarray]:
    d = loss_differentials(values)
    dbar = d.mean(axis=1)
    boot = d[:, indices].mean(axis=2).T
    se = np.sqrt(np.mean((boot - dbar) ** 2, axis=0))
    t = np.zeros_like(dbar)
    positive = se > 0
    t[positive] = dbar[positive] / se[positive]
    degenerate_mask = ~positive & (dbar != 0)
    t[degenerate_mask] = np.where(dbar[degenerate_mask] > 0, np.inf, -np.inf)
    degenerate = bool(degenerate_mask.any())
    if degenerate:
        logger.debug("zero bootstrap variance with a nonzero mean differential")
    stats = EpaStatistics(dbar=dbar, se=se, t=t, T=float(t.max()), degenerate=degenerate)
    return stats, boot


def _pvalue(stats: EpaStatistics, boot: np.ndarray) -> float:
    centered = np.zeros_like(boot)
    positive = stats.se > 0
    centered[:, positive] = (boot[:, positive] - stats.dbar[positive]) / stats.se[positive]
    t_star = centered.max(axis=1)
    return float((1 + np.sum(t_star >= stats.T)) / (boot.shape[0] + 1))


def _indices_for(L: LossMatrix, n_bootstrap: int, block_len: int, seed: int) -> np.ndarray:
    return moving_block_indices(len(L.days), block_len, n_bootstrap, np.random.default_rng(seed))


def epa_statistics(L: LossMatrix, n_bootstrap: int = 1000, block_len: int = 2, seed: int = 0) -> EpaStatistics:
    """Differentials, bootstrap standard errors and t-statistics of every model."""
    stats, _ = _statistics(np.asarray(L.values), _indices_for(L, n_bootstrap, block_len, seed))
    return stats


def bootstrap_pvalue(L: LossMatrix, n_bootstrap: int = 1000, block_len: int = 2, seed: int = 0) -> float:
    """p = (1 + #{T* >= T}) / (B + 1) for the hypothesis of equal predictive ability."""
    if n_bootstrap < 100:
        raise ValueError("at least 100 bootstrap replicates are required")
    stats, boot = _statistics(np.asarray(L.values), _indices_for(L, n_bootstrap, block_len, seed))
    return _pvalue(stats, boot)


def inverse_loss_weights(mean_losses: Mapping[str, float]) -> Dict[str, float]:
    """w_i proportional to 1/L_i; zero-loss models share the whole weight equally."""
    zero = [m for m, loss in mean_losses.items() if loss <= 0.0]
    if zero:
        return {m: (1.0 / len(zero) if m in zero else 0.0) for m in mean_losses}
    inverse = {m: 1.0 / loss for m, loss in mean_losses.items()}
    total = sum(inverse.values())
    return {m: v / total for m, v in inverse.items()}


def mcs_run(
    L: LossMatrix,
    alpha: float = 0.10,
    n_bootstrap: int = 1000,
    seed: int = 0,
    block_len: int = 2,
) -> SuperiorSet:
    """Sequentially eliminate the worst model while EPA is rejected at `alpha`.

    Bootstrap indices are drawn once per run and reused at every step.
    """
    order = sorted(range(len(L.models)), key=lambda i: L.models[i])
    names = [L.models[i] for i in order]
    values = np.asarray(L.values)[order]
    means = values.mean(axis=1)
    mean_losses = {n: float(m) for n, m in zip(names, means)}
    indices = _indices_for(L, n_bootstrap, block_len, seed)

    alive = list(range(len(names)))
    pvalues: Dict[str, float] = {}
    eliminated: List[str] = []
    running = 0.0
    degenerate = False
    while len(alive) > 1:
        stats, boot = _statistics(values[alive], indices)
        degenerate = degenerate or stats.degenerate
        p = _pvalue(stats, boot)
        if p >= alpha:
            break
        worst = min(range(len(alive)), key=lambda k: (-stats.t[k], -means[alive[k]], names[alive[k]]))
        running = max(running, p)
        name = names[alive.pop(worst)]
        pvalues[name] = running
        eliminated.append(name)

    survivors = [names[i] for i in alive]
    for name in survivors:
        pvalues[name] = 1.0
    if degenerate:
        logger.info("MCS run hit a degenerate statistic; eliminated %s", eliminated)
    return SuperiorSet(
        survivors=survivors,
        pvalues=pvalues,
        elimination_order=eliminated,
        mean_losses=mean_losses,
        weights=inverse_loss_weights({n: mean_losses[n] for n in survivors}),
        alpha=alpha,
        degenerate=degenerate,
    )


def equal_weight_set(models: Sequence[str], alpha: float, mean_losses: Optional[Dict[str, float]] = None) -> SuperiorSet:
    """Fallback set when there is too little loss history to test."""
    names = sorted(models)
    return SuperiorSet(
        survivors=names,
        pvalues={n: 1.0 for n in names},
        mean_losses=mean_losses or {},
        weights={n: 1.0 / len(names) for n in names},
        alpha=alpha,
        fallback=True,
    )


def combine(ss: SuperiorSet, forecasts: Mapping[str, ModelForecast]) -> CombinedForecast:
    """Apply one superior set's weights to every block."""
    return combine_blocks([ss] * BLOCKS_PER_DAY, forecasts)


def combine_blocks(sets: Sequence[SuperiorSet], forecasts: Mapping[str, ModelForecast]) -> CombinedForecast:
    """Per-block weighted sum of survivor forecasts.

    Raises:
        ValueError: if a survivor has no forecast
    """
    if not forecasts:
        raise ValueError("no forecasts to combine")
    dates = {f.date for f in forecasts.values()}
    if len(dates) != 1:
        raise ValueError("forecasts disagree on the delivery date")
    values = np.zeros(len(sets))
    for b, ss in enumerate(sets):
        total = 0.0
        for name in ss.survivors:
            if name not in forecasts:
                raise ValueError(f"missing forecast for survivor {name}")
            total += ss.weights[name] * float(forecasts[name].values[b])
        values[b] = total
    return CombinedForecast(date=dates.pop(), values=values, weights=[dict(ss.weights) for ss in sets])


def block_seed(seed: int, day: dt.date, key: int) -> int:
    """Independent generator seed per (run seed, day, block or group)."""
    return int(np.random.SeedSequence([seed, day.toordinal(), key]).generate_state(1)[0])


class McsEnsemble:
    """Per-block (or per block-group) selection over a trailing loss window."""

    def __init__(self, config: Optional[McsConfig] = None):
        self.config = config or McsConfig()

    def select_day(
        self,
        target: dt.date,
        candidates: Sequence[str],
        history: Mapping[dt.date, Mapping[str, np.ndarray]],
    ) -> List[SuperiorSet]:
        """Superior sets for the 96 blocks of `target`.

        Args:
            target: Day being forecast
            candidates: Models with a forecast for `target`
            history: Per day, per model absolute percentage errors (96 entries,
                NaN where the actual was excluded)

        Returns:
            One SuperiorSet per block
        """
        cfg = self.config
        window = sorted(d for d in history if d < target)[-cfg.window_days:]
        usable = [
            m for m in sorted(candidates)
            if window and all(m in history[d] for d in window)
        ]
        if len(window) < 2 or len(usable) < 2:
            base = usable if len(usable) == 1 else list(candidates)
            return [equal_weight_set(base, cfg.alpha)] * BLOCKS_PER_DAY

        cube = np.stack([np.stack([history[d][m] for d in window]) for m in usable])
        if cfg.group_blocks:
            sets: List[SuperiorSet] = []
            for g, (lo, hi) in enumerate(BLOCK_GROUPS):
                samples = cube[:, :, lo - 1:hi].reshape(len(usable), -1)
                labels = [f"{d.isoformat()}#{b}" for d in window for b in range(lo, hi + 1)]
                ss = self._select(usable, samples, labels, block_seed(cfg.seed, target, 100 + g))
                sets.extend([ss] * (hi - lo + 1))
            return sets
        labels = [d.isoformat() for d in window]
        return [
            self._select(usable, cube[:, :, b], labels, block_seed(cfg.seed, target, b + 1))
            for b in range(BLOCKS_PER_DAY)
        ]

    def _select(self, models: List[str], samples: np.ndarray, labels: List[str], seed: int) -> SuperiorSet:
        keep = np.all(np.isfinite(samples), axis=0)
        if keep.sum() < 2:
            return equal_weight_set(models, self.config.alpha)
        L = LossMatrix(
            models=tuple(models),
            days=tuple(l for l, k in zip(labels, keep) if k),
            values=samples[:, keep],
        )
        return mcs_run(L, self.config.alpha, self.config.n_bootstrap, seed, self.config.block_len)
