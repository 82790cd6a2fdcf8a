"""Image-quality and convergence metrics.

The region-of-interest figure of merit compares tumor/control contrast
statistics of a reconstruction against the same statistics of the phantom;
region means are taken over pixels whose centers fall inside the analytic
disks.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy import stats

from .errors import NumericalError
from .phantom import Phantom, pixels_in_disk


def _contrast_ratio(img: np.ndarray, phantom: Phantom) -> float:
    spec = phantom.spec
    tumor_means = []
    control_means = []
    for pair in phantom.roi_pairs:
        tmask = pixels_in_disk(spec.n_side, spec.extent, pair.tumor_center,
                               pair.radius)
        cmask = pixels_in_disk(spec.n_side, spec.extent, pair.control_center,
                               pair.radius)
        tumor_means.append(float(img[tmask].mean()))
        control_means.append(float(img[cmask].mean()))
    tumor_means = np.array(tumor_means)
    control_means = np.array(control_means)
    numer = float(np.sum(tumor_means - control_means))
    dev = control_means - control_means.mean()
    denom = float(np.sum(dev * dev))
    if denom == 0.0:
        raise NumericalError("degenerate ROI set: all control means equal")
    return numer / denom


def iroi(recon: np.ndarray, phantom: Phantom) -> float:
    """Tumor/control contrast ratio of the reconstruction over the phantom's.

    Equals 1 when the reconstruction is the phantom itself, 0 when the
    reconstruction shows no tumor/control contrast at all.
    """
    if len(phantom.roi_pairs) < 2:
        raise NumericalError("need at least two ROI pairs")
    recon = np.asarray(recon, dtype=np.float64).reshape(phantom.image.shape)
    return _contrast_ratio(recon, phantom) / _contrast_ratio(phantom.image,
                                                             phantom)


def optimality_gap_trace(records, psi_star: float) -> np.ndarray:
    """Relative objective gaps (psi_k - psi_star) / |psi_star| per iteration."""
    psi = np.array([r.psi for r in records])
    return (psi - psi_star) / abs(psi_star)


def paired_compare(samples_a, samples_b) -> tuple[float, float, float]:
    """Means and one-sided paired t-test p-value for H0: mean(a - b) <= 0.

    Zero-variance differences short-circuit to p in {0, 0.5, 1} by the sign
    of the mean difference.
    """
    a = np.asarray(samples_a, dtype=np.float64).reshape(-1)
    b = np.asarray(samples_b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ValueError("paired samples must have equal length")
    if a.size < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean_d = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        p = 0.5 if mean_d == 0.0 else (0.0 if mean_d > 0.0 else 1.0)
    else:
        tstat = mean_d / (sd / math.sqrt(d.size))
        p = float(stats.t.sf(tstat, d.size - 1))
    return float(a.mean()), float(b.mean()), p


RESULT_COLUMNS = ("algorithm", "seed", "iroi", "residual", "psi_final")
SUMMARY_COLUMNS = ("algorithm", "mean_iroi", "p_value")


def write_results_csv(path, rows) -> None:
    """Per-run rows (algorithm, seed, iroi, residual, psi_final)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for algorithm, seed, value, residual, psi_final in rows:
            writer.writerow([
                algorithm, seed, f"{value:.17g}", f"{residual:.17g}",
                f"{psi_final:.17g}",
            ])


def write_summary_csv(path, rows) -> None:
    """Per-algorithm rows (algorithm, mean_iroi, p_value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for algorithm, mean_value, p in rows:
            writer.writerow([algorithm, f"{mean_value:.17g}", f"{p:.17g}"])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
