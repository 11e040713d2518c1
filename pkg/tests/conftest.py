"""Shared raster builders for the test suite.

All synthetic images are deterministic functions of their arguments; tests
that need randomness create their own seeded generators.
"""

import math

import numpy as np
import pytest


def gaussian_raster(size, cx, cy, sigma_x, sigma_y=None, angle=0.0):
    """Anisotropic Gaussian bump exp(-u^2/2sx^2 - v^2/2sy^2), amplitude 1."""
    sigma_y = sigma_x if sigma_y is None else sigma_y
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    c, s = math.cos(angle), math.sin(angle)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return np.exp(-(u * u) / (2 * sigma_x**2) - (v * v) / (2 * sigma_y**2))


def blob_texture(seed, size, count, lo, hi, sigma_lo, sigma_hi):
    """Mix of random anisotropic Gaussians, normalized to [0, 1].

    Centers are drawn uniformly from [lo, hi) per axis so descriptors of the
    strongest keypoints stay clear of the sampling margin.
    """
    rng = np.random.default_rng(seed)
    field = np.zeros((size, size))
    for _ in range(count):
        cx, cy = rng.uniform(lo, hi, 2)
        sx, sy = rng.uniform(sigma_lo, sigma_hi, 2)
        phi = rng.uniform(0, math.pi)
        amp = rng.uniform(-1.0, 1.0)
        field += amp * gaussian_raster(size, cx, cy, sx, sy, phi)
    field -= field.min()
    field /= field.max()
    return field


@pytest.fixture(scope="session")
def toy_texture():
    """256x256 texture with described keypoints; reused by pipeline tests."""
    return blob_texture(seed=5, size=256, count=40, lo=95, hi=161,
                        sigma_lo=2.0, sigma_hi=4.0)
