"""Row-action reconstruction and TV superiorization baselines.

ART relaxes toward one data hyperplane at a time; superiorization interleaves
those sweeps with small TV-reducing perturbations along non-ascending
directions, shrinking the perturbation budget geometrically.
"""

from __future__ import annotations

import numpy as np

from . import tv
from .errors import NumericalError

# Paper-default superiorization parameters.
ART_ALPHA = 0.05
SUP_A = 1.0 - 1e-4
SUP_B = 3e-2
SUP_I = 10

MAX_TRIALS = 10 ** 6
MAX_SWEEPS = 10 ** 4


def _bit_reverse(value: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


def efficient_order(m_v: int, m_r: int) -> np.ndarray:
    """Row permutation visiting views in bit-reversed order.

    Successive views are maximally decorrelated, which speeds up row-action
    sweeps; rays keep their natural order within a view. The view count is
    padded to the next power of two and out-of-range codes are skipped.
    """
    if m_v < 1 or m_r < 1:
        raise ValueError("counts must be >= 1")
    bits = max(1, (m_v - 1).bit_length())
    views = [r for r in (_bit_reverse(c, bits) for c in range(1 << bits))
             if r < m_v]
    order = np.empty(m_v * m_r, dtype=np.int64)
    pos = 0
    rays = np.arange(m_r, dtype=np.int64)
    for v in views:
        order[pos:pos + m_r] = v * m_r + rays
        pos += m_r
    return order


def art_sweep(op, b: np.ndarray, x: np.ndarray, alpha: float,
              order: np.ndarray) -> np.ndarray:
    """One full relaxed Kaczmarz cycle over all rows in the given order.

    Rows with zero squared norm are skipped. Uses the operator's fused sweep
    when it provides one; the generic path goes through ``row``.
    """
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    order = np.asarray(order, dtype=np.int64)
    if hasattr(op, "art_sweep"):
        return op.art_sweep(b, x, alpha, order)
    out = np.asarray(x, dtype=np.float64).reshape(-1).copy()
    for i in order:
        r = op.row(int(i))
        if r.squared_norm == 0.0:
            continue
        resid = float(r.values @ out[r.indices]) - b[i]
        out[r.indices] -= (alpha * resid / r.squared_norm) * r.values
    return out


def nonascending_tv(img: np.ndarray) -> np.ndarray:
    """Unit-or-zero direction along which TV does not increase locally.

    Built from the TV partial derivatives where they are well defined (all
    square-root terms touching a pixel have nonzero denominator) and zero
    elsewhere, then negated and normalized.
    """
    tilde = tv.smooth_partials(img)
    norm = float(np.sqrt(np.sum(tilde * tilde)))
    if norm == 0.0:
        return np.zeros_like(img)
    return -tilde / norm


def suptv(img: np.ndarray, l: int, a: float = SUP_A, b: float = SUP_B,
          I: int = SUP_I, max_trials: int = MAX_TRIALS) -> tuple[np.ndarray, int]:
    """TV superiorization step: I accepted perturbations of shrinking size.

    Each outer step picks a non-ascending direction and shrinks the step
    b * a^l (incrementing l per trial) until TV does not increase. Returns
    the perturbed image and the updated l; TV(output) <= TV(input).
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    if b <= 0.0:
        raise ValueError("b must be positive")
    y = np.asarray(img, dtype=np.float64).copy()
    tv_y = tv.tv_value(y)
    for _ in range(I):
        t = nonascending_tv(y)
        trials = 0
        while True:
            step = b * a ** l
            y_try = y + step * t
            l += 1
            tv_try = tv.tv_value(y_try)
            if tv_try <= tv_y:
                break
            trials += 1
            if trials >= max_trials:
                raise NumericalError(
                    "TV superiorization stalled shrinking its perturbation"
                )
        y = y_try
        tv_y = tv_try
    return y, l


def supart(op, b: np.ndarray, x0: np.ndarray, eps: float,
           alpha: float = ART_ALPHA, order: np.ndarray | None = None,
           a: float = SUP_A, sup_b: float = SUP_B, I: int = SUP_I,
           max_sweeps: int = MAX_SWEEPS,
           on_sweep=None) -> tuple[np.ndarray, int]:
    """Superiorized ART: perturb with suptv, then one ART sweep, until the
    squared residual drops to eps.

    ``x0`` is a 2-D image. Returns (image, sweeps). The optional
    ``on_sweep(k, residual_sq, tv_before, tv_after, l)`` callback observes
    every cycle.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x0, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("supart expects a 2-D starting image")
    shape = x.shape
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if order is None:
        order = np.arange(op.nrows, dtype=np.int64)

    def residual_sq(img):
        r = op.apply(img.reshape(-1)) - b
        return float(r @ r)

    l = 0
    sweeps = 0
    res = residual_sq(x)
    while res > eps:
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"superiorized ART did not reach eps={eps:g} in "
                f"{max_sweeps} sweeps (residual^2 {res:g})"
            )
        tv_before = tv.tv_value(x)
        x_half, l_new = suptv(x, l, a, sup_b, I)
        tv_after = tv.tv_value(x_half)
        x = art_sweep(op, b, x_half.reshape(-1), alpha, order).reshape(shape)
        sweeps += 1
        res = residual_sq(x)
        if on_sweep is not None:
            on_sweep(sweeps, res, tv_before, tv_after, l_new)
        l = l_new
    return x, sweeps
