"""Matplotlib rendering of the report figures.

Figures are written straight to files next to the delimited outputs;
there is no interactive backend involved.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mccrary import McCraryResult
from .rdd import BinnedSeries


def save_rdd_figure(binned: BinnedSeries, cutoff: float, path, title: str | None = None) -> None:
    """Binned outcome means against the running variable, cutoff marked."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    sizes = 12.0 + 3.0 * np.sqrt(binned.bin_counts)
    mids = np.asarray(binned.bin_midpoints)
    means = np.asarray(binned.bin_means)
    left = mids < cutoff
    ax.scatter(mids[left], means[left], s=sizes[left], color="#1f77b4", label="below cutoff")
    ax.scatter(mids[~left], means[~left], s=sizes[~left], color="#ff7f0e", label="above cutoff")
    ax.axvline(cutoff, color="black", linestyle="--", linewidth=1)
    ax.set_xlabel("predicted pass probability W")
    ax.set_ylabel("mean exam points Y")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mccrary_figure(result: McCraryResult, cutoff: float, path) -> None:
    """Smoothed density of the running variable on each side of the cutoff."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for side, color in (("left", "#1f77b4"), ("right", "#ff7f0e")):
        points = [(x, d) for x, d, s in result.curve if s == side]
        xs = [p[0] for p in points]
        ds = [p[1] for p in points]
        ax.plot(xs, ds, color=color, label=f"{side} of cutoff")
    ax.axvline(cutoff, color="black", linestyle="--", linewidth=1)
    ax.set_xlabel("predicted pass probability W")
    ax.set_ylabel("estimated density")
    ax.set_title(
        f"density discontinuity test: theta = {result.theta:.3g}, p = {result.p_value:.3g}"
    )
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
