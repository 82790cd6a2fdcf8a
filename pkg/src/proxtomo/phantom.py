"""Deterministic head-style phantoms with mirrored lesion pairs.

A phantom is a skull-like high-attenuation annulus around a homogeneous
interior, a smooth low-amplitude random field inside the interior, and a
fixed set of small circular lesion slots. Each slot is realized on its
nominal side or mirrored across the central vertical axis, chosen per slot
with equal probability; the unchosen side stays at background attenuation
and serves as the control region for the paired figure of merit.

Everything is a deterministic function of (seed, spec). The random draws
happen in a fixed order: inhomogeneity coefficients first (skipped when the
amplitude is zero), then one side choice per slot (skipped when a side is
forced).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Display window for lesion inspection dumps: attenuation below the first
# value renders white, above the second black (units 1/cm).
GRAY_WINDOW = (0.204, 0.21765)


@dataclass(frozen=True)
class LesionSlot:
    """Nominal lesion placement on the right half (cx > 0)."""

    cx: float
    cy: float
    radius: float
    delta: float


def default_slots(radius: float = 0.4, delta: float = 0.005) -> tuple[LesionSlot, ...]:
    """Ten well-separated slots for the default 9.1 cm half-extent layout."""
    centers = [
        (1.6, 4.8), (3.3, 3.8), (4.8, 2.3), (5.4, 0.3), (4.7, -1.9),
        (3.3, -3.7), (1.7, -4.9), (1.1, -2.4), (2.6, 0.6), (1.2, 1.8),
    ]
    return tuple(LesionSlot(cx, cy, radius, delta) for cx, cy in centers)


@dataclass(frozen=True)
class PhantomSpec:
    n_side: int = 128
    extent: float = 9.1
    skull_center: tuple[float, float] = (0.0, 0.0)
    skull_outer: float = 8.0
    skull_inner: float = 7.2
    skull_mu: float = 0.416
    background_mu: float = 0.21
    slots: tuple[LesionSlot, ...] = field(default_factory=default_slots)
    inhomogeneity_amplitude: float = 0.002
    inhomogeneity_order: int = 4
    force_side: str = "random"  # random | left | right


@dataclass(frozen=True)
class RoiPair:
    """Analytic tumor/control disk pair; the control mirrors the tumor."""

    tumor_center: tuple[float, float]
    control_center: tuple[float, float]
    radius: float
    side: str


@dataclass(frozen=True)
class Phantom:
    image: np.ndarray
    spec: PhantomSpec
    seed: int
    roi_pairs: tuple[RoiPair, ...]


def pixel_centers(n_side: int, extent: float) -> tuple[np.ndarray, np.ndarray]:
    """(X, Y) coordinate grids of pixel centers; row 0 is the top row."""
    h = 2.0 * extent / n_side
    xs = -extent + (np.arange(n_side) + 0.5) * h
    ys = extent - (np.arange(n_side) + 0.5) * h
    return np.meshgrid(xs, ys)


def pixels_in_disk(n_side: int, extent: float, center: tuple[float, float],
                   radius: float) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the disk."""
    x, y = pixel_centers(n_side, extent)
    return (x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius * radius


def _validate_slots(spec: PhantomSpec) -> None:
    disks = []
    for s in spec.slots:
        if s.radius <= 0:
            raise ConfigError("lesion radius must be positive")
        disks.append((s.cx, s.cy, s.radius))
        disks.append((-s.cx, s.cy, s.radius))
    for a in range(len(disks)):
        xa, ya, ra = disks[a]
        rho = np.hypot(xa - spec.skull_center[0], ya - spec.skull_center[1])
        if rho + ra > spec.skull_inner:
            raise ConfigError(
                f"lesion slot at ({xa:g}, {ya:g}) leaves the skull interior"
            )
        for b in range(a + 1, len(disks)):
            xb, yb, rb = disks[b]
            if np.hypot(xa - xb, ya - yb) < ra + rb:
                raise ConfigError(
                    f"lesion slots at ({xa:g}, {ya:g}) and ({xb:g}, {yb:g}) overlap"
                )


def _smooth_field(rng, n_side: int, extent: float, order: int) -> np.ndarray:
    """Random smooth field from a low-order cosine basis, max-normalized."""
    x, y = pixel_centers(n_side, extent)
    u = (x + extent) / (2.0 * extent)
    v = (y + extent) / (2.0 * extent)
    out = np.zeros((n_side, n_side))
    coeffs = rng.uniform(-1.0, 1.0, size=(order + 1, order + 1))
    for p in range(order + 1):
        for q in range(order + 1):
            if p == 0 and q == 0:
                continue
            out += coeffs[p, q] * np.cos(np.pi * p * u) * np.cos(np.pi * q * v)
    peak = np.abs(out).max()
    if peak > 0:
        out /= peak
    return out


def generate_phantom(seed: int, spec: PhantomSpec) -> Phantom:
    """Deterministic phantom for (seed, spec)."""
    if spec.skull_inner >= spec.skull_outer:
        raise ConfigError("skull inner radius must be below the outer radius")
    if spec.force_side not in ("random", "left", "right"):
        raise ConfigError(f"unknown force_side {spec.force_side!r}")
    _validate_slots(spec)

    rng = np.random.default_rng(seed)
    x, y = pixel_centers(spec.n_side, spec.extent)
    rho = np.hypot(x - spec.skull_center[0], y - spec.skull_center[1])

    img = np.zeros((spec.n_side, spec.n_side))
    img[rho <= spec.skull_outer] = spec.skull_mu
    interior = rho <= spec.skull_inner
    img[interior] = spec.background_mu

    if spec.inhomogeneity_amplitude > 0:
        bump = _smooth_field(rng, spec.n_side, spec.extent,
                             spec.inhomogeneity_order)
        img[interior] += spec.inhomogeneity_amplitude * bump[interior]

    n_slots = len(spec.slots)
    if spec.force_side == "random":
        left = rng.integers(0, 2, size=n_slots).astype(bool)
    else:
        left = np.full(n_slots, spec.force_side == "left")

    pairs = []
    for s, goes_left in zip(spec.slots, left):
        tumor = (-s.cx, s.cy) if goes_left else (s.cx, s.cy)
        control = (s.cx, s.cy) if goes_left else (-s.cx, s.cy)
        img[pixels_in_disk(spec.n_side, spec.extent, tumor, s.radius)] += s.delta
        pairs.append(RoiPair(tumor, control, s.radius,
                             "left" if goes_left else "right"))

    return Phantom(img, spec, int(seed), tuple(pairs))
