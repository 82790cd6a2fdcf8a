"""Accelerated proximal gradient engine with adaptive overrelaxation.

A single iteration template drives five variants:

===========  ============  ==========================================
variant      iterate x_k   overrelaxation eta_k
===========  ============  ==========================================
fista        prox point    1
mfista       best-of-two   1
oista        prox point    2, no safeguard (no convergence guarantee)
fpgm         prox point    adaptive: min of gamma_k, the decreasing
                           chain eta_{k-1} L_k / L_{k-1} (after the
                           free phase k <= K), and the cap eta_bar
mfpgm        best-of-two   same adaptive rule, gamma_k includes the
                           monotonicity gap
===========  ============  ==========================================

Every variant shares the backtracking line search on L, the momentum
recurrence t_{k+1} = (1 + sqrt(1 + 4 t_k^2))/2, and the four-term update

  y_{k+1} = x_k + ((t_k-1)/t_{k+1}) (x_k - x_{k-1})
            + (t_k/t_{k+1}) (z_k - x_k)
            + (t_k/t_{k+1}) (eta_k - 1) (z_k - y_k),

which collapses to the classical momentum update when x_k = z_k and
eta_k = 1. gamma_k is the per-iteration computable bound on admissible
overrelaxation built from the three gap quantities; choosing eta_k at or
below it preserves the O(1/k^2) objective-gap guarantee.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .objective import DeltaTriple

VARIANTS = ("fista", "mfista", "oista", "fpgm", "mfpgm")
MONOTONE_VARIANTS = ("mfista", "mfpgm")

# Backtracking gives up after this many L increases; hitting it means the
# objective or the prox is broken (e.g. nonfinite values).
MAX_BACKTRACKS = 200


@dataclass
class SolverConfig:
    variant: str = "fpgm"
    t1: float = 1.0
    L0: float = 1.0
    beta: float = 2.0
    K: float = 10
    eta_bar: float = math.inf
    N: int = 100
    skip_delta_c: bool = False

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.t1 >= 1.0:
            raise ValueError("t1 must be >= 1")
        if not self.L0 > 0.0:
            raise ValueError("L0 must be positive")
        if not self.beta > 1.0:
            raise ValueError("beta must be > 1")
        if not (self.K >= 0 or math.isinf(self.K)):
            raise ValueError("K must be a nonnegative integer or inf")
        if not (self.eta_bar >= 1.0):
            raise ValueError("eta_bar must lie in [1, inf]")
        if self.N < 1:
            raise ValueError("N must be positive")


@dataclass
class SolverState:
    """Mutable per-iteration state exposed to iteration callbacks."""

    k: int
    x_prev: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: float
    t_next: float
    L: float
    L_prev: float
    eta: float
    eta_prev: float
    psi_x: float


@dataclass(frozen=True)
class IterationRecord:
    k: int
    psi: float
    L: float
    eta: float
    gamma: float
    backtracks: int
    wall_ms: float


def t_next(t: float) -> float:
    """Next momentum parameter; satisfies t+ (t+ - 1) = t^2."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def _backtrack_rich(f, phi, y, fy, gy, L_start, beta, prox_state):
    """Backtracking with precomputed f(y), grad f(y).

    Returns (L, z, n_backtracks, f(z), phi(z), Q_L(z, y)) for the smallest
    L in {L_start * beta^j} whose prox point passes the sufficient-decrease
    test psi(z) <= Q_L(z, y).
    """
    L = L_start
    for j in range(MAX_BACKTRACKS + 1):
        z = phi.prox(y - gy / L, L, prox_state)
        dz = z - y
        fz = f.value(z)
        phiz = phi.value(z)
        q = fy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + phiz
        if fz + phiz <= q:
            return L, z, j, fz, phiz, q
        L = beta * L
    raise NumericalError(
        f"backtracking exceeded {MAX_BACKTRACKS} increases of L; "
        "objective or prox looks broken"
    )


def backtrack(f, phi, y, L_start: float, beta: float, prox_state=None):
    """Smallest L in {L_start * beta^j} passing sufficient decrease.

    Returns (L, z, n_backtracks) with z the accepted prox point.
    """
    if L_start <= 0:
        raise ValueError("L_start must be positive")
    if beta <= 1:
        raise ValueError("beta must be > 1")
    y = np.asarray(y, dtype=np.float64)
    fy, gy = f.value_and_grad(y)
    L, z, n, _, _, _ = _backtrack_rich(f, phi, y, fy, gy, L_start, beta, prox_state)
    return L, z, n


def gamma_k(deltas: DeltaTriple, t: float, L: float, z, y,
            monotone_gap: float = 0.0) -> float:
    """Computable upper bound on the admissible overrelaxation.

    Returns +inf when z == y (the prox point is a fixed point, so the
    overrelaxation term vanishes and no bound is needed). The result is
    floored at 1: every summand is nonnegative once (L, y) passed the
    sufficient-decrease test, so values below 1 can only be rounding noise.
    """
    dz = np.asarray(z) - np.asarray(y)
    denom = L * float(dz @ dz)
    if denom == 0.0:
        return math.inf
    num = deltas.delta_a + (1.0 - 1.0 / t) * (deltas.delta_b + deltas.delta_c)
    num += monotone_gap
    return max(1.0, 1.0 + 2.0 * num / denom)


def eta_select(k: int, K, gamma: float, eta_prev: float, L: float,
               L_prev: float, eta_bar: float) -> float:
    """Overrelaxation for iteration k.

    Free phase (k <= K): min of gamma and the cap. Afterwards the decreasing
    chain eta_prev * L / L_prev joins the min so that eta_k / L_k never
    increases. Clamped below at 1.
    """
    if k <= K:
        val = min(gamma, eta_bar)
    else:
        val = min(gamma, eta_prev * (L / L_prev), eta_bar)
    return max(1.0, val)


def y_next(x, x_prev, z, y, t: float, t_next_val: float, eta: float) -> np.ndarray:
    """Four-term momentum update producing y_{k+1}.

    With x == z and eta == 1 this is the classical two-term momentum update;
    with x == z and eta == 2 it adds the full (z - y) correction.
    """
    a = (t - 1.0) / t_next_val
    b = t / t_next_val
    out = x + a * (x - x_prev) + b * (z - x)
    if math.isfinite(eta):
        out = out + b * (eta - 1.0) * (z - y)
    # eta == inf only happens when z == y exactly, where the term vanishes.
    return out


def run(config: SolverConfig, problem, x0, on_iteration=None):
    """Execute N iterations of the configured variant from x0.

    ``problem`` is a CompositeObjective (or anything with .f and .phi).
    Returns (x_final, trace) where trace is a list of IterationRecord. The
    optional ``on_iteration(state, record, deltas)`` callback sees the full
    internal state after each iteration.
    """
    config.validate()
    f, phi = problem.f, problem.phi
    monotone = config.variant in MONOTONE_VARIANTS

    x_prev = np.asarray(x0, dtype=np.float64).copy()
    phi_prev = phi.value(x_prev)
    if not math.isfinite(phi_prev):
        raise ValueError("x0 must be feasible for the nonsmooth part")
    f_prev = f.value(x_prev)
    psi_prev = f_prev + phi_prev

    y = x_prev.copy()
    t = config.t1
    L_accepted = config.L0
    eta_prev = config.eta_bar
    prox_state = phi.make_prox_state() if hasattr(phi, "make_prox_state") else None

    records: list[IterationRecord] = []
    for k in range(1, config.N + 1):
        tic = time.perf_counter()
        fy, gy = f.value_and_grad(y)
        L, z, nbt, fz, phiz, q = _backtrack_rich(
            f, phi, y, fy, gy, L_accepted, config.beta, prox_state
        )
        psi_z = fz + phiz
        delta_a = q - psi_z

        if monotone and psi_prev < psi_z:
            x_k, f_k, phi_k, psi_k = x_prev, f_prev, phi_prev, psi_prev
            gap = psi_z - psi_k
        else:
            x_k, f_k, phi_k, psi_k = z, fz, phiz, psi_z
            gap = 0.0

        delta_b = f_prev - fy - float(gy @ (x_prev - y))
        if config.skip_delta_c:
            delta_c = 0.0
        else:
            sub = -gy - L * (z - y)
            delta_c = phi_prev - phiz - float(sub @ (x_prev - z))
            if not math.isfinite(delta_c):
                # Infeasible x_{k-1} gives +inf; 0 is the safe lower bound.
                delta_c = 0.0
        d = DeltaTriple(delta_a, delta_b, delta_c)
        gamma = gamma_k(d, t, L, z, y, gap)

        if config.variant in ("fista", "mfista"):
            eta = 1.0
        elif config.variant == "oista":
            eta = 2.0
        else:
            eta = eta_select(k, config.K, gamma, eta_prev, L, L_accepted,
                             config.eta_bar)

        tn = t_next(t)
        y = y_next(x_k, x_prev, z, y, t, tn, eta)
        wall_ms = (time.perf_counter() - tic) * 1e3
        rec = IterationRecord(k, psi_k, L, eta, gamma, nbt, wall_ms)
        records.append(rec)
        if on_iteration is not None:
            state = SolverState(k, x_prev, x_k, y, z, t, tn, L, L_accepted,
                                eta, eta_prev, psi_k)
            on_iteration(state, rec, d)

        x_prev, f_prev, phi_prev, psi_prev = x_k, f_k, phi_k, psi_k
        L_accepted = L
        eta_prev = eta
        t = tn

    return x_prev, records


TRACE_COLUMNS = ("k", "psi", "L", "eta", "gamma", "backtracks", "wall_ms")


def write_trace_csv(path, records) -> None:
    """Write a trace with full double precision (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([
                r.k,
                f"{r.psi:.17g}",
                f"{r.L:.17g}",
                f"{r.eta:.17g}",
                f"{r.gamma:.17g}",
                r.backtracks,
                f"{r.wall_ms:.17g}",
            ])


def read_trace_csv(path) -> list[IterationRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header!r}")
        for row in reader:
            records.append(IterationRecord(
                int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                float(row[4]), int(row[5]), float(row[6]),
            ))
    return records
