"""Reward curves from a metrics stream, written as SVG."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trainer import MetricsRecord  # noqa: E402


def read_metrics(path) -> list[MetricsRecord]:
    with open(path) as f:
        return [MetricsRecord.from_json(line) for line in f if line.strip()]


def plot_metrics(records: list[MetricsRecord], out) -> None:
    """Mean episode return against iteration and against wall-clock seconds."""
    recs = [r for r in records if not math.isnan(r.mean_episode_return)]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.5), constrained_layout=True)
    ret = [r.mean_episode_return for r in recs]
    axes[0].plot([r.iteration for r in recs], ret)
    axes[0].set_xlabel("iteration")
    axes[1].plot([r.wall_clock_seconds for r in recs], ret)
    axes[1].set_xlabel("wall-clock [s]")
    for ax in axes:
        ax.set_ylabel("mean episode return")
        ax.grid(alpha=0.3)
    fig.savefig(out, format="svg")
    plt.close(fig)
