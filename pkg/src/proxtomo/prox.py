"""Proximal operators.

Nonnegative projection, the proximal step of weight*TV plus nonnegativity
computed approximately by a fast gradient method on the dual problem, and the
proximal gradient step that combines a gradient step with a prox.
"""

from __future__ import annotations

import math

import numpy as np

from . import tv


def project_nonneg(x: np.ndarray) -> np.ndarray:
    """Componentwise projection onto the nonnegative orthant."""
    return np.maximum(x, 0.0)


class TVDualState:
    """Warm-start carrier for the dual variables of the TV prox.

    One instance belongs to one solver run; runs never share state.
    """

    def __init__(self):
        self.dual_r: np.ndarray | None = None
        self.dual_a: np.ndarray | None = None


def _project_pair(wr: np.ndarray, wa: np.ndarray) -> None:
    """Project each per-pixel dual pair onto the unit Euclidean disk."""
    norm = np.sqrt(wr * wr + wa * wa)
    np.maximum(norm, 1.0, out=norm)
    wr /= norm
    wa /= norm


def prox_tv_nonneg(
    img: np.ndarray,
    lam: float,
    L: float,
    inner_iters: int = 10,
    state: TVDualState | None = None,
) -> np.ndarray:
    """Approximate prox of lam*TV + nonnegativity at ``img`` with weight L.

    Minimizes lam*TV(y) + (L/2)||y - img||^2 over y >= 0, i.e. the effective
    regularization weight of the scaled subproblem is mu = lam/L. The dual
    variables are driven by the accelerated gradient recurrence with stepsize
    1/(8*mu), 8 being the operator-norm bound of the discrete gradient; the
    returned image is the projected primal point, hence always nonnegative.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if L <= 0:
        raise ValueError("L must be positive")
    if inner_iters < 1:
        raise ValueError("inner_iters must be positive")
    if img.ndim != 2:
        raise ValueError("prox_tv_nonneg expects a 2-D image")
    mu = lam / L
    if mu == 0.0:
        return project_nonneg(img)

    if state is not None and state.dual_r is not None:
        pr = state.dual_r.copy()
        pa = state.dual_a.copy()
    else:
        pr = np.zeros_like(img)
        pa = np.zeros_like(img)
    # Momentum point; the t-sequence restarts on every call.
    qr = pr.copy()
    qa = pa.copy()
    t = 1.0
    step = 1.0 / (8.0 * mu)

    for _ in range(inner_iters):
        x = np.maximum(img - mu * tv.forward_diff_adjoint(qr, qa), 0.0)
        gr, ga = tv.forward_diff(x)
        nr = qr + step * gr
        na = qa + step * ga
        _project_pair(nr, na)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        coef = (t - 1.0) / t_new
        qr = nr + coef * (nr - pr)
        qa = na + coef * (na - pa)
        pr, pa = nr, na
        t = t_new

    if state is not None:
        state.dual_r = pr
        state.dual_a = pa
    return np.maximum(img - mu * tv.forward_diff_adjoint(pr, pa), 0.0)


def proximal_gradient_step(f, phi, L: float, y: np.ndarray, state=None) -> np.ndarray:
    """One proximal gradient step: prox of phi at y - grad f(y)/L."""
    if L <= 0:
        raise ValueError("L must be positive")
    _, gy = f.value_and_grad(y)
    return phi.prox(y - gy / L, L, state)
