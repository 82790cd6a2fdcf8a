"""Linear operators with forward, adjoint and row access.

Solvers touch operators only through this interface: matrix-vector products
plus per-row extraction for row-action sweeps. Operators are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SparseRow:
    """One operator row in sparse form with its squared norm precomputed.

    ``indices`` is strictly increasing. Rows that miss every column (e.g.
    rays missing the image square) have empty arrays and ``squared_norm``
    zero; consumers must guard the division.
    """

    indices: np.ndarray
    values: np.ndarray
    squared_norm: float


class LinearOperator:
    """Abstract map from R^ncols to R^nrows."""

    nrows: int = 0
    ncols: int = 0

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward product. Accepts any array with ``ncols`` elements."""
        raise NotImplementedError

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Adjoint (transpose) product. Accepts ``nrows`` elements."""
        raise NotImplementedError

    def row(self, i: int) -> SparseRow:
        """The i-th row as a SparseRow."""
        raise NotImplementedError

    def _as_input(self, v, size: int) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.size != size:
            raise ValueError(
                f"operator expects {size} elements, got array of size {v.size}"
            )
        return np.ascontiguousarray(v.reshape(-1))

    def _check_row_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.nrows:
            raise IndexError(f"row index {i} out of range [0, {self.nrows})")
        return i


class DenseOperator(LinearOperator):
    """Operator backed by an explicit dense matrix.

    Reference implementation used by the tests as the correctness oracle for
    the on-the-fly projectors; not meant for large problems.
    """

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("dense operator needs a 2-D matrix")
        self._a = np.ascontiguousarray(a)
        self.nrows, self.ncols = a.shape

    @property
    def matrix(self) -> np.ndarray:
        return self._a

    def apply(self, x):
        return self._a @ self._as_input(x, self.ncols)

    def apply_adjoint(self, y):
        return self._a.T @ self._as_input(y, self.nrows)

    def row(self, i):
        i = self._check_row_index(i)
        r = self._a[i]
        nz = np.nonzero(r)[0]
        vals = r[nz].copy()
        return SparseRow(nz.astype(np.int64), vals, float(vals @ vals))


def materialize(op: LinearOperator) -> np.ndarray:
    """Assemble the dense matrix of ``op`` by applying it to basis vectors.

    Test oracle only; cost is one forward product per column.
    """
    cols = np.empty((op.nrows, op.ncols))
    e = np.zeros(op.ncols)
    for j in range(op.ncols):
        e[j] = 1.0
        cols[:, j] = op.apply(e)
        e[j] = 0.0
    return cols
