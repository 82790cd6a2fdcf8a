"""Matplotlib rendering of run reports.

Figures land next to the CSV files each command writes; everything uses the
Agg backend, so no display is needed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .phantom import GRAY_WINDOW


def save_image_png(path, img: np.ndarray, window: tuple[float, float] | None = None,
                   title: str | None = None) -> None:
    """Grayscale dump of an image, optionally with a display window.

    ``window=GRAY_WINDOW`` reproduces the lesion-inspection rendering: values
    below the window show white, above it black.
    """
    fig, ax = plt.subplots(figsize=(5, 5))
    if window is None:
        vmin, vmax = float(np.min(img)), float(np.max(img))
    else:
        vmin, vmax = window
    ax.imshow(img, cmap="gray_r", vmin=vmin, vmax=vmax)
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def save_trace_figure(path, records, title: str | None = None) -> None:
    """Objective value per iteration for one solver run."""
    ks = [r.k for r in records]
    psi = [r.psi for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, psi)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective value")
    if title:
        ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def save_residual_figure(path, sweep_rows, title: str | None = None) -> None:
    """Squared residual per sweep for a row-action run."""
    ks = [row[0] for row in sweep_rows]
    res = [row[1] for row in sweep_rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ks, res)
    ax.set_xlabel("sweep")
    ax.set_ylabel("squared residual")
    if title:
        ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def save_gap_curves(path, curves: dict[str, tuple[np.ndarray, np.ndarray]],
                    xlabel: str = "iteration") -> None:
    """Log-scale optimality-gap curves, one line per leg.

    Gaps at or below zero (possible for non-monotone legs hovering at the
    reference value) are clipped to the smallest positive gap for display.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    positive = [g[g > 0] for _, g in curves.values() if np.any(g > 0)]
    floor = min(v.min() for v in positive) if positive else 1e-16
    for name, (xs, gaps) in curves.items():
        ax.semilogy(xs, np.maximum(gaps, floor), label=name, linewidth=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("relative optimality gap")
    ax.legend(fontsize=7)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def save_study_figure(path, rows, summary) -> None:
    """Per-seed figure-of-merit scatter with per-algorithm means."""
    algorithms = [name for name, _, _ in summary]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for pos, name in enumerate(algorithms):
        vals = [r.iroi for r in rows if r.algorithm == name]
        ax.plot([pos] * len(vals), vals, "o", markersize=3, alpha=0.5)
    means = [mean for _, mean, _ in summary]
    ax.plot(range(len(algorithms)), means, "k_", markersize=20,
            label="mean")
    ax.set_xticks(range(len(algorithms)))
    ax.set_xticklabels(algorithms, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("IROI")
    ax.legend()
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
