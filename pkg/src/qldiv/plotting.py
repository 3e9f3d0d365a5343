"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from qldiv.bench import TimingRecord

STYLE = {
    "optselect": dict(color="#1b7837", marker="o"),
    "xquad": dict(color="#2166ac", marker="s"),
    "iaselect": dict(color="#b2182b", marker="^"),
}


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    return path


def plot_scaling(records: Sequence[TimingRecord], path: str | Path) -> Path:
    """Median time against k, one panel per candidate-set size n, log-log."""
    sizes = sorted({r.n for r in records})
    fig = Figure(figsize=(4.2 * len(sizes), 3.6))
    axes = fig.subplots(1, len(sizes), squeeze=False)[0]
    for ax, n in zip(axes, sizes):
        for name in sorted({r.algorithm for r in records}):
            rows = sorted((r for r in records if r.n == n and r.algorithm == name), key=lambda r: r.k)
            if not rows:
                continue
            ax.plot(
                [r.k for r in rows],
                [r.median_us / 1000.0 for r in rows],
                label=name,
                **STYLE.get(name, {}),
            )
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("k (selected results)")
        ax.set_title(f"|R_q| = {n:,}")
        ax.grid(True, which="both", alpha=0.3)
    axes[0].set_ylabel("median time (ms)")
    axes[0].legend(frameon=False)
    return _save(fig, path)


def plot_metrics(means: Mapping[str, Mapping[int, float]], path: str | Path) -> Path:
    """Mean metric value against rank cutoff, one line per metric."""
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.subplots()
    for metric, values in means.items():
        cutoffs = sorted(values)
        ax.plot(cutoffs, [values[c] for c in cutoffs], marker="o", label=metric)
    ax.set_xscale("log")
    ax.set_xlabel("rank cutoff")
    ax.set_ylabel("mean over topics")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    return _save(fig, path)
