"""Static SVG line charts of actual vs forecast prices."""

import datetime as dt
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.evaluation.metrics import COMBINED, daily_values  # noqa: E402
from src.models import BLOCKS_PER_DAY, BacktestResult  # noqa: E402

plt.rcParams["svg.hashsalt"] = "thinmkt"

logger = logging.getLogger(__name__)


def plot_day(result: BacktestResult, day: dt.date, path: Path, models: Optional[Sequence[str]] = None) -> Path:
    """Actual vs combined (and optionally named models) over the 96 blocks of `day`."""
    series = daily_values(result, day)
    blocks = np.arange(1, BLOCKS_PER_DAY + 1)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(blocks, series["actual"], color="black", linewidth=1.5, label="actual")
    ax.plot(blocks, series[COMBINED], color="tab:red", linewidth=1.2, label=COMBINED)
    for name in models or []:
        if name in series:
            ax.plot(blocks, series[name], linewidth=0.8, alpha=0.8, label=name)
    ax.set_xlabel("block")
    ax.set_ylabel("price")
    ax.set_title(f"{result.zone.value} {day.isoformat()}")
    ax.set_xlim(1, BLOCKS_PER_DAY)
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_all(result: BacktestResult, out_dir: Path, models: Optional[Sequence[str]] = None) -> List[Path]:
    """One chart per evaluated day, named `chart_YYYY-MM-DD.svg`."""
    out_dir.mkdir(parents=True, exist_ok=True)
    days = sorted({r.date for r in result.records})
    paths = [plot_day(result, d, out_dir / f"chart_{d.isoformat()}.svg", models) for d in days]
    logger.info("wrote %d charts to %s", len(paths), out_dir)
    return paths
