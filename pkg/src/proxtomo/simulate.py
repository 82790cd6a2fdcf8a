"""Photon-count simulation, sinogram estimation and solver initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .linop import LinearOperator
from .phantom import Phantom
from .radon import Geometry, RadonOperator


@dataclass(frozen=True)
class CountData:
    """Per-ray photon counts with the matching flat and dark fields."""

    counts: np.ndarray
    flat: np.ndarray
    dark: np.ndarray
    geometry: Geometry
    seed: int
    noiseless: bool = False


def simulate_counts(phantom: Phantom, geometry: Geometry, flat, dark,
                    seed: int, noiseless: bool = False) -> CountData:
    """Poisson counts with mean flat * exp(-Rx) + dark.

    ``flat`` and ``dark`` may be scalars or per-ray arrays. With
    ``noiseless`` the counts are set to their means (no sampling), which
    makes the downstream sinogram estimate exact up to clamping.
    """
    m = geometry.nrows
    flat = np.broadcast_to(np.asarray(flat, dtype=np.float64), (m,)).copy()
    dark = np.broadcast_to(np.asarray(dark, dtype=np.float64), (m,)).copy()
    if np.any(dark < 0) or np.any(flat <= dark):
        raise ConfigError("fields must satisfy flat > dark >= 0")
    op = RadonOperator(geometry)
    mean = flat * np.exp(-op.apply(phantom.image)) + dark
    if noiseless:
        counts = mean
    else:
        counts = np.random.default_rng(seed).poisson(mean).astype(np.float64)
    return CountData(counts, flat, dark, geometry, int(seed), bool(noiseless))


def estimate_sinogram(data: CountData) -> np.ndarray:
    """Log-ratio line-integral estimates ln((flat-dark)/(counts-dark)).

    The count excess over dark is clamped below at one count; the ratio is
    undefined otherwise.
    """
    if np.any(data.flat <= data.dark):
        raise DataError("flat field must exceed dark field on every ray")
    net = np.maximum(data.counts - data.dark, 1.0)
    return np.log((data.flat - data.dark) / net)


def uniform_init(op: LinearOperator, sinogram: np.ndarray) -> np.ndarray:
    """Constant image whose forward projection sums to the data sum."""
    sinogram = np.asarray(sinogram, dtype=np.float64).reshape(-1)
    if sinogram.size != op.nrows:
        raise ValueError("sinogram length must match operator rows")
    mass = float(np.sum(op.apply(np.ones(op.ncols))))
    if mass <= 0:
        raise NumericalError("projector has zero mass, cannot initialize")
    c = float(np.sum(sinogram)) / mass
    return np.full(op.ncols, c)
