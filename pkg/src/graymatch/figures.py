"""Matplotlib figures rendered next to delimited reports.

Everything goes through the Agg backend with fixed PNG metadata so a
re-render of unchanged data is byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .histogram import Histogram, NormalizedCdf

_PNG_META = {"Software": "graymatch"}
_DPI = 110


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)


def histogram_figure(hist: Histogram, cdf: NormalizedCdf, path: str, title: str = "") -> None:
    """Foreground histogram and its CDF, stacked."""
    bins = np.arange(hist.counts.size)
    fig, (ax_h, ax_c) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax_h.fill_between(bins, hist.counts, step="mid", color="#4878a8", linewidth=0)
    ax_h.set_ylabel("foreground pixels")
    if title:
        ax_h.set_title(title)
    ax_c.plot(bins, cdf.values, color="#a84848")
    ax_c.set_ylabel("cumulative fraction")
    ax_c.set_xlabel("intensity bin")
    ax_c.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    _save(fig, path)


def distances_figure(
    names: list[str], pre: list[float], post: list[float], path: str, ylabel: str, title: str = ""
) -> None:
    """Per-image pre/post distances, one marker pair per image."""
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6, 0.25 * len(names) + 3), 4))
    ax.plot(x, pre, "o", color="#888888", label="before")
    ax.plot(x, post, "o", color="#2c7a2c", label="after")
    ax.set_xlabel("image (sorted by path)")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.axhline(float(np.mean(pre)), color="#888888", linewidth=0.8, linestyle="--")
    ax.axhline(float(np.mean(post)), color="#2c7a2c", linewidth=0.8, linestyle="--")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def metrics_figure(
    names: list[str],
    pre_l1: list[float],
    post_l1: list[float],
    kl_pre: list[float],
    kl_post: list[float],
    path: str,
) -> None:
    """Two panels: CDF-L1 and KL divergence to the reference, before vs after."""
    x = np.arange(len(names))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for ax, before, after, label in (
        (ax1, pre_l1, post_l1, "CDF L1 to reference"),
        (ax2, kl_pre, kl_post, "KL divergence to reference"),
    ):
        ax.plot(x, before, "o", color="#888888", label="before")
        ax.plot(x, after, "o", color="#2c7a2c", label="after")
        ax.set_xlabel("image (sorted by name)")
        ax.set_ylabel(label)
        ax.legend()
    fig.tight_layout()
    _save(fig, path)
