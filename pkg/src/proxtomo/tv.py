"""Isotropic total variation on 2-D pixel grids.

Each pixel couples to its right neighbor (next column) and the pixel above it
(previous row). Differences whose neighbor falls outside the grid are zero,
so boundary pixels contribute one-sided or empty terms.
"""

from __future__ import annotations

import numpy as np

# Denominator threshold below which a square-root term counts as
# non-differentiable for the smooth-partials construction.
SMOOTH_EPS = 1e-12


def forward_diff(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (right, above) differences with zero boundary rows/cols."""
    dr = np.zeros_like(img)
    da = np.zeros_like(img)
    dr[:, :-1] = img[:, :-1] - img[:, 1:]
    da[1:, :] = img[1:, :] - img[:-1, :]
    return dr, da


def forward_diff_adjoint(dr: np.ndarray, da: np.ndarray) -> np.ndarray:
    """Adjoint of forward_diff; entries at the structural zeros are ignored."""
    out = np.zeros_like(dr)
    out[:, :-1] += dr[:, :-1]
    out[:, 1:] -= dr[:, :-1]
    out[1:, :] += da[1:, :]
    out[:-1, :] -= da[1:, :]
    return out


def term_magnitudes(img: np.ndarray) -> np.ndarray:
    dr, da = forward_diff(img)
    return np.sqrt(dr * dr + da * da)


def tv_value(img: np.ndarray) -> float:
    """Sum of per-pixel gradient magnitudes."""
    return float(term_magnitudes(img).sum())


def smooth_partials(img: np.ndarray, eps: float = SMOOTH_EPS) -> np.ndarray:
    """Partial derivatives of TV where they exist, zero elsewhere.

    A term is non-differentiable when its magnitude is at most ``eps`` while
    it still depends on at least one neighbor; every pixel such a term
    touches gets a zero entry. Terms of pixels with no in-grid neighbors are
    identically zero and do not poison anything.
    """
    h, w = img.shape
    dr, da = forward_diff(img)
    mags = np.sqrt(dr * dr + da * da)

    has_neighbor = np.zeros((h, w), dtype=bool)
    has_neighbor[:, : w - 1] = True
    has_neighbor[1:, :] = True
    bad = has_neighbor & (mags <= eps)

    safe = np.where(mags > eps, mags, 1.0)
    cr = np.where(bad, 0.0, dr / safe)
    ca = np.where(bad, 0.0, da / safe)

    out = cr + ca
    out[:, 1:] -= cr[:, :-1]
    out[:-1, :] -= ca[1:, :]

    undefined = bad.copy()
    undefined[:, 1:] |= bad[:, :-1]
    undefined[:-1, :] |= bad[1:, :]
    out[undefined] = 0.0
    return out
