"""Composite objectives: smooth data terms plus nonsmooth regularizers.

The solvers minimize psi(x) = f(x) + phi(x) where f supplies values and
gradients and phi supplies extended values and a prox. This module also holds
the quadratic surrogate and the three gap quantities the overrelaxed solvers
track each iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import prox as _prox
from . import tv as _tv

# Floor applied to the transmission log argument; keeps extreme iterates from
# producing -inf without disturbing well-conditioned evaluations.
LOG_FLOOR = 1e-30


class LeastSquares:
    """f(x) = ||Rx - b||^2 with gradient 2 R^T (Rx - b).

    No 1/2 factor: the objective is the plain squared residual, so the
    gradient carries the factor 2.
    """

    def __init__(self, op, b):
        self.op = op
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.b.size != op.nrows:
            raise ValueError("b length must match operator rows")

    def value(self, x) -> float:
        r = self.op.apply(x) - self.b
        return float(r @ r)

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        r = self.op.apply(x) - self.b
        return float(r @ r), 2.0 * self.op.apply_adjoint(r)

    def residual_sq(self, x) -> float:
        return self.value(x)


class TransmissionLikelihood:
    """Poisson transmission negative log-likelihood.

    f(x) = sum_i h_i((Rx)_i) with h_i(s) = w_i e^{-s} + d_i
    - p_i log(w_i e^{-s} + d_i), where w is the flat field, d the dark field
    and p the photon counts. The gradient is R^T g with
    g_i = -w_i e^{-s_i} (1 - p_i / (w_i e^{-s_i} + d_i)).
    """

    def __init__(self, op, flat, dark, counts):
        m = op.nrows
        self.op = op
        self.flat = np.broadcast_to(np.asarray(flat, dtype=np.float64), (m,)).copy()
        self.dark = np.broadcast_to(np.asarray(dark, dtype=np.float64), (m,)).copy()
        self.counts = np.broadcast_to(np.asarray(counts, dtype=np.float64), (m,)).copy()
        if np.any(self.flat <= 0):
            raise ValueError("flat field must be positive")
        if np.any(self.dark < 0):
            raise ValueError("dark field must be nonnegative")
        if np.any(self.counts < 0):
            raise ValueError("photon counts must be nonnegative")

    def _pieces(self, x):
        s = self.op.apply(x)
        atten = self.flat * np.exp(-s)
        mean = np.maximum(atten + self.dark, LOG_FLOOR)
        value = float(np.sum(atten + self.dark - self.counts * np.log(mean)))
        return value, atten, mean

    def value(self, x) -> float:
        return self._pieces(x)[0]

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        value, atten, mean = self._pieces(x)
        g = -atten * (1.0 - self.counts / mean)
        return value, self.op.apply_adjoint(g)


class ZeroPart:
    """phi identically zero; prox is the identity. Test helper."""

    def value(self, x) -> float:
        return 0.0

    def prox(self, v, L, state=None):
        return np.asarray(v, dtype=np.float64).copy()

    def make_prox_state(self):
        return None


class NonnegIndicator:
    """Indicator of the nonnegative orthant; prox is the projection."""

    def value(self, x) -> float:
        x = np.asarray(x)
        return 0.0 if np.all(x >= 0.0) else math.inf

    def prox(self, v, L, state=None):
        return _prox.project_nonneg(np.asarray(v, dtype=np.float64))

    def make_prox_state(self):
        return None


class TVNonneg:
    """lam * TV + nonnegativity indicator on an n x n image.

    Vectors are reshaped to ``shape`` internally. The prox is approximate
    (``inner_iters`` dual fast-gradient steps); with warm_start the dual
    variables persist across calls of one solver run.
    """

    def __init__(self, lam: float, shape: tuple[int, int], inner_iters: int = 10,
                 warm_start: bool = True):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.shape = tuple(shape)
        self.inner_iters = int(inner_iters)
        self.warm_start = bool(warm_start)

    def value(self, x) -> float:
        img = np.asarray(x, dtype=np.float64).reshape(self.shape)
        if np.any(img < 0.0):
            return math.inf
        if self.lam == 0.0:
            return 0.0
        return self.lam * _tv.tv_value(img)

    def prox(self, v, L, state=None):
        img = np.asarray(v, dtype=np.float64).reshape(self.shape)
        out = _prox.prox_tv_nonneg(img, self.lam, L, self.inner_iters, state)
        return out.reshape(np.asarray(v).shape)

    def make_prox_state(self):
        return _prox.TVDualState() if self.warm_start else None


@dataclass(frozen=True)
class CompositeObjective:
    """Pairing of a smooth part f and a nonsmooth part phi."""

    f: object
    phi: object

    def psi(self, x) -> float:
        return self.f.value(x) + self.phi.value(x)


def surrogate_q(f, phi, L: float, x, y) -> float:
    """Quadratic upper model of psi around y, evaluated at x.

    f(y) + <grad f(y), x - y> + (L/2)||x - y||^2 + phi(x). Propagates +inf
    from phi.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fy, gy = f.value_and_grad(y)
    d = x - y
    return fy + float(gy @ d) + 0.5 * L * float(d @ d) + phi.value(x)


@dataclass(frozen=True)
class DeltaTriple:
    """Surrogate gap, smooth Bregman gap, and prox-subgradient gap.

    delta_b and delta_c are nonnegative by convexity; delta_a is nonnegative
    whenever (L, y) passed the sufficient-decrease test.
    """

    delta_a: float
    delta_b: float
    delta_c: float


def deltas(f, phi, L: float, x, y, z) -> DeltaTriple:
    """The three gap quantities at (L, x, y) with z the prox point of y.

    ``z`` must be the proximal gradient point of y at weight L so that
    -grad f(y) - L(z - y) is a subgradient of phi at z; the caller supplies
    it to avoid recomputing the prox.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    fy, gy = f.value_and_grad(y)
    fx = f.value(x)
    fz = f.value(z)
    phix = phi.value(x)
    phiz = phi.value(z)

    dz = z - y
    q = fy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + phiz
    delta_a = q - (fz + phiz)
    delta_b = fx - fy - float(gy @ (x - y))
    sub = -gy - L * dz
    delta_c = phix - phiz - float(sub @ (x - z))
    return DeltaTriple(delta_a, delta_b, delta_c)
