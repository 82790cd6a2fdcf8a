"""Flat binary array files with a small text header.

Layout: UTF-8 ``key: value`` lines starting with a magic line, a terminating
``end-header`` line, then the raw little-endian float64 payload in C order.
The header always carries the shape; writers may add arbitrary string
metadata (extent, seed, ...). Files round-trip without loss.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError

MAGIC = "proxtomo-array 1"
_END = "end-header"


def write_array(path, arr: np.ndarray, **meta: object) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    lines = [MAGIC, f"shape: {' '.join(str(s) for s in arr.shape)}"]
    for key, value in meta.items():
        key = key.strip()
        if ":" in key or not key:
            raise ValueError(f"bad metadata key {key!r}")
        lines.append(f"{key}: {value}")
    lines.append(_END)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_array(path) -> tuple[np.ndarray, dict[str, str]]:
    with open(path, "rb") as fh:
        first = fh.readline().decode().rstrip("\n")
        if first != MAGIC:
            raise DataError(f"{path}: not a proxtomo array file")
        meta: dict[str, str] = {}
        while True:
            line = fh.readline().decode().rstrip("\n")
            if line == _END:
                break
            if not line:
                raise DataError(f"{path}: truncated header")
            key, _, value = line.partition(":")
            meta[key.strip()] = value.strip()
        shape = tuple(int(s) for s in meta.pop("shape").split())
        payload = fh.read()
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise DataError(f"{path}: payload has {len(payload)} bytes, "
                        f"expected {expected}")
    arr = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    return arr, meta


def array_to_csv(path, arr: np.ndarray) -> None:
    """Plain CSV dump (one row per line) for offline inspection."""
    arr = np.asarray(arr, dtype=np.float64)
    rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])
