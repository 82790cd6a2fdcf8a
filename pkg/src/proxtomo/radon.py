"""Parallel-beam geometry and an on-the-fly ray-driven projector.

The projector never assembles its matrix. Each ray is traced through the
pixel grid with an incremental traversal that yields the exact intersection
length of the ray with every pixel it crosses; forward products, adjoint
products, row extraction and the row-action sweep all share that single
traversal routine, so they are consistent to the last bit.

Angles and normalized offsets follow the acquisition convention

    theta_i = -pi * (kappa_i - 1) / (m_v - 1),   kappa_i = 1 + (i-1) div m_r
    t_i     = -1 + 2 (ell_i - 1) / (m_r - 1),    ell_i   = 1 + (i-1) mod m_r

for 1-based ray index i, i.e. rays are stored view-major. Physical offsets
are the normalized ones scaled by the half-extent of the image square.

Forward products parallelize over rays (each ray owns its output slot);
the adjoint accumulates serially in fixed ray order so results are
run-to-run identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit, prange

from .errors import ConfigError
from .linop import LinearOperator, SparseRow


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam sampling plus the reconstruction grid."""

    n_views: int
    n_rays: int
    n_side: int
    extent: float
    theta: np.ndarray     # per-view angles, radians
    offsets: np.ndarray   # per-ray offsets, normalized to [-1, 1]

    @property
    def nrows(self) -> int:
        return self.n_views * self.n_rays

    @property
    def ncols(self) -> int:
        return self.n_side * self.n_side

    @property
    def pixel_size(self) -> float:
        return 2.0 * self.extent / self.n_side

    def ray(self, i: int) -> tuple[float, float]:
        """(theta, normalized offset) of ray i in view-major order."""
        if not 0 <= i < self.nrows:
            raise IndexError(f"ray index {i} out of range")
        return float(self.theta[i // self.n_rays]), float(self.offsets[i % self.n_rays])

    def ray_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat per-ray (cos theta, sin theta, physical offset) tables."""
        ct = np.repeat(np.cos(self.theta), self.n_rays)
        st = np.repeat(np.sin(self.theta), self.n_rays)
        tp = np.tile(self.offsets * self.extent, self.n_views)
        return ct, st, tp


def make_geometry(m_v: int, m_r: int, n_side: int = 128,
                  extent: float = 1.0) -> Geometry:
    """Evenly sampled parallel-beam geometry over a square image domain."""
    if m_v < 2 or m_r < 2:
        raise ConfigError("need at least 2 views and 2 rays per view")
    if n_side < 1 or extent <= 0:
        raise ConfigError("grid side must be >= 1 and extent positive")
    kappa = np.arange(m_v, dtype=np.float64)
    ell = np.arange(m_r, dtype=np.float64)
    theta = -np.pi * kappa / (m_v - 1)
    offsets = -1.0 + 2.0 * ell / (m_r - 1)
    return Geometry(m_v, m_r, n_side, float(extent), theta, offsets)


# Direction components smaller than this are treated as exactly axis-aligned.
_DIR_EPS = 1e-14
_FAR = 1e300


@njit(cache=True, nogil=True)
def _trace_into(ct, st, tp, extent, n, h, idx, w):
    """Trace one ray, storing pixel indices and intersection lengths.

    The ray is p(s) = tp*(ct, st) + s*(-st, ct) with unit direction. Returns
    the number of segments written into idx/w (traversal order, lengths in
    physical units). Buffers must hold at least 2n + 4 entries.
    """
    px = tp * ct
    py = tp * st
    dx = -st
    dy = ct

    smin = -_FAR
    smax = _FAR
    if dx > _DIR_EPS or dx < -_DIR_EPS:
        s1 = (-extent - px) / dx
        s2 = (extent - px) / dx
        if s1 < s2:
            lo, hi = s1, s2
        else:
            lo, hi = s2, s1
        if lo > smin:
            smin = lo
        if hi < smax:
            smax = hi
    elif px <= -extent or px >= extent:
        return 0
    if dy > _DIR_EPS or dy < -_DIR_EPS:
        s1 = (-extent - py) / dy
        s2 = (extent - py) / dy
        if s1 < s2:
            lo, hi = s1, s2
        else:
            lo, hi = s2, s1
        if lo > smin:
            smin = lo
        if hi < smax:
            smax = hi
    elif py <= -extent or py >= extent:
        return 0
    if smin >= smax:
        return 0

    # Entry cell; entry coordinates sit on the boundary up to roundoff, so
    # clamp into the grid.
    ix = int(np.floor((px + smin * dx + extent) / h))
    iy = int(np.floor((py + smin * dy + extent) / h))
    if ix < 0:
        ix = 0
    elif ix > n - 1:
        ix = n - 1
    if iy < 0:
        iy = 0
    elif iy > n - 1:
        iy = n - 1

    if dx > _DIR_EPS:
        sx = ((-extent + (ix + 1) * h) - px) / dx
        dsx = h / dx
        step_x = 1
    elif dx < -_DIR_EPS:
        sx = ((-extent + ix * h) - px) / dx
        dsx = -h / dx
        step_x = -1
    else:
        sx = _FAR
        dsx = 0.0
        step_x = 0
    if dy > _DIR_EPS:
        sy = ((-extent + (iy + 1) * h) - py) / dy
        dsy = h / dy
        step_y = 1
    elif dy < -_DIR_EPS:
        sy = ((-extent + iy * h) - py) / dy
        dsy = -h / dy
        step_y = -1
    else:
        sy = _FAR
        dsy = 0.0
        step_y = 0

    nnz = 0
    s = smin
    while True:
        s_next = sx if sx < sy else sy
        if smax < s_next:
            s_next = smax
        seg = s_next - s
        if seg > 0.0 and 0 <= ix < n and 0 <= iy < n:
            # y counts from the bottom edge; image rows count from the top.
            idx[nnz] = (n - 1 - iy) * n + ix
            w[nnz] = seg
            nnz += 1
        if s_next >= smax:
            break
        if sx <= sy:
            ix += step_x
            sx += dsx
        else:
            iy += step_y
            sy += dsy
        s = s_next
        if (ix < 0 and step_x <= 0) or (ix >= n and step_x >= 0):
            break
        if (iy < 0 and step_y <= 0) or (iy >= n and step_y >= 0):
            break
    return nnz


@njit(cache=True, nogil=True, parallel=True)
def _forward_kernel(x, ct, st, tp, extent, n, h, out):
    m = out.shape[0]
    for i in prange(m):
        idx = np.empty(2 * n + 4, np.int64)
        w = np.empty(2 * n + 4, np.float64)
        nnz = _trace_into(ct[i], st[i], tp[i], extent, n, h, idx, w)
        acc = 0.0
        for j in range(nnz):
            acc += w[j] * x[idx[j]]
        out[i] = acc


@njit(cache=True, nogil=True)
def _adjoint_kernel(y, ct, st, tp, extent, n, h, out):
    m = y.shape[0]
    idx = np.empty(2 * n + 4, np.int64)
    w = np.empty(2 * n + 4, np.float64)
    for i in range(m):
        yi = y[i]
        if yi == 0.0:
            continue
        nnz = _trace_into(ct[i], st[i], tp[i], extent, n, h, idx, w)
        for j in range(nnz):
            out[idx[j]] += w[j] * yi


@njit(cache=True, nogil=True)
def _row_kernel(i, ct, st, tp, extent, n, h, idx, w):
    return _trace_into(ct[i], st[i], tp[i], extent, n, h, idx, w)


@njit(cache=True, nogil=True)
def _art_sweep_kernel(x, b, alpha, order, ct, st, tp, extent, n, h):
    idx = np.empty(2 * n + 4, np.int64)
    w = np.empty(2 * n + 4, np.float64)
    for oi in range(order.shape[0]):
        i = order[oi]
        nnz = _trace_into(ct[i], st[i], tp[i], extent, n, h, idx, w)
        dot = 0.0
        sq = 0.0
        for j in range(nnz):
            dot += w[j] * x[idx[j]]
            sq += w[j] * w[j]
        if sq > 0.0:
            c = alpha * (dot - b[i]) / sq
            for j in range(nnz):
                x[idx[j]] -= c * w[j]


class RadonOperator(LinearOperator):
    """Discrete Radon transform of a pixel image for a fixed geometry."""

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self.nrows = geometry.nrows
        self.ncols = geometry.ncols

    @cached_property
    def _tables(self):
        ct, st, tp = self.geometry.ray_tables()
        return (np.ascontiguousarray(ct), np.ascontiguousarray(st),
                np.ascontiguousarray(tp))

    def apply(self, x):
        x = self._as_input(x, self.ncols)
        ct, st, tp = self._tables
        out = np.empty(self.nrows)
        _forward_kernel(x, ct, st, tp, self.geometry.extent,
                        self.geometry.n_side, self.geometry.pixel_size, out)
        return out

    def apply_adjoint(self, y):
        y = self._as_input(y, self.nrows)
        ct, st, tp = self._tables
        out = np.zeros(self.ncols)
        _adjoint_kernel(y, ct, st, tp, self.geometry.extent,
                        self.geometry.n_side, self.geometry.pixel_size, out)
        return out

    def row(self, i):
        i = self._check_row_index(i)
        ct, st, tp = self._tables
        n = self.geometry.n_side
        idx = np.empty(2 * n + 4, np.int64)
        w = np.empty(2 * n + 4, np.float64)
        nnz = _row_kernel(i, ct, st, tp, self.geometry.extent, n,
                          self.geometry.pixel_size, idx, w)
        order = np.argsort(idx[:nnz], kind="stable")
        vals = w[:nnz][order]
        return SparseRow(idx[:nnz][order].copy(), vals.copy(),
                         float(vals @ vals))

    def art_sweep(self, b, x, alpha, order):
        """One full relaxed row-action cycle in the given row order.

        Fast path used by the baseline sweeps; mathematically identical to
        iterating over ``row(i)``, up to summation order inside each row.
        """
        b = self._as_input(b, self.nrows)
        out = self._as_input(x, self.ncols).copy()
        ct, st, tp = self._tables
        _art_sweep_kernel(out, b, float(alpha),
                          np.ascontiguousarray(order, dtype=np.int64),
                          ct, st, tp, self.geometry.extent,
                          self.geometry.n_side, self.geometry.pixel_size)
        return out
