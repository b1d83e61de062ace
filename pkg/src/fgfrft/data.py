"""Bundled synthetic test data.

The files under ``data/`` are regenerated bit-for-bit by the functions
below; the Set12 images and the voxelized point clouds are not shipped.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

SMOOTH_IMAGE = "smooth64.pgm"
PLANE_CLOUD = "plane4000.xyz"


def smooth_image(size: int = 64) -> np.ndarray:
    """8-bit grayscale ramp with a slow ripple."""
    r, c = np.mgrid[0:size, 0:size] / size
    img = 60 + 110 * r + 30 * c + 35 * np.sin(2 * np.pi * c) * np.cos(np.pi * r)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def plane_cloud(n: int = 4000, extent: float = 1000.0, seed: int = 7) -> np.ndarray:
    """Points scattered on the tilted plane ``z = 0.3 x + 0.2 y + 100``.

    Coordinates are rounded to 1/64 so the ASCII file round-trips exactly.
    """
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, extent, size=(n, 2))
    z = 0.3 * xy[:, 0] + 0.2 * xy[:, 1] + 100.0
    return np.round(np.column_stack([xy, z]) * 64) / 64


def bundled_path(name: str) -> str:
    return str(resources.files("fgfrft") / "data" / name)
