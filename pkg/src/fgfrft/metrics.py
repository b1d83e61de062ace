"""Matrix approximation errors and signal/image quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import NumericalError, ShapeError

SSIM_WIN = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    mae: float
    nmse: float
    n: int


def matrix_errors(approx, reference) -> ErrorReport:
    """MSE and MAE averaged over the N^2 entries of ``approx - reference``,
    NMSE as ``||D||_F^2 / ||reference||_F^2``."""
    approx = np.asarray(approx)
    reference = np.asarray(reference)
    if approx.shape != reference.shape:
        raise ShapeError(f"shape mismatch {approx.shape} vs {reference.shape}")
    ref_sq = float(np.vdot(reference, reference).real)
    if ref_sq == 0.0:
        raise NumericalError("NMSE is undefined for an all-zero reference")
    d = np.abs(approx - reference)
    sq = float(np.sum(d * d))
    size = d.size
    return ErrorReport(sq / size, float(d.sum()) / size, sq / ref_sq, approx.shape[0])


def psnr(reconstruction, reference, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    a = np.asarray(reconstruction, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeError("PSNR of an empty signal")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def _gaussian_window():
    r = SSIM_WIN // 2
    x = np.arange(-r, r + 1, dtype=float)
    w = np.exp(-(x**2) / (2 * SSIM_SIGMA**2))
    return w / w.sum()


def _filter_valid(img, w):
    out = correlate1d(correlate1d(img, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    r = w.size // 2
    return out[r:-r, r:-r]


def ssim(a, b, peak: float = 255.0) -> float:
    """Mean structural similarity over all fully contained 11x11 Gaussian windows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"need two 2-D images of equal shape, got {a.shape} and {b.shape}")
    if min(a.shape) < SSIM_WIN:
        raise ShapeError(f"image {a.shape} is smaller than the {SSIM_WIN}x{SSIM_WIN} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    w = _gaussian_window()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    saa = _filter_valid(a * a, w) - mu_a**2
    sbb = _filter_valid(b * b, w) - mu_b**2
    sab = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


def cloud_peak(points) -> float:
    """Largest per-axis coordinate range of a point cloud."""
    p = np.asarray(points, dtype=float)
    return float(np.max(p.max(axis=0) - p.min(axis=0)))
