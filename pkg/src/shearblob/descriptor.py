"""Local descriptor built from shearlet coefficients on a scaled, rotated grid.

A keypoint's neighborhood is resampled on a 24x24 grid with spacing equal
to the keypoint's pixel scale, rotated to its orientation. Per shearing,
signed and absolute Gaussian-weighted sums over 16 overlapping 9x9
subregions are concatenated and l2-normalized. Shearing indices are
circularly shifted by the orientation so that corresponding physical
directions line up across rotated views; the shift direction is pinned by
the rotation property test in the test suite.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .detector import Keypoint
from .system import ShearletCoefficients, num_shears

__all__ = [
    "common_orientations",
    "sample_grid",
    "rotate_frame",
    "shear_shift",
    "subregion_stats",
    "describe",
    "describe_all",
    "format_oxford_descriptors",
    "parse_oxford_descriptors",
]

GRID_SIDE = 24
SUBREGION_SIDE = 9
SUBREGION_STARTS = (0, 5, 10, 15)
SUBREGION_INDICES = (-2, -1, 1, 2)
SAMPLE_SIGMA = 2.5   # Gaussian over grid-unit distance to the subregion centroid
SUBREGION_SIGMA = 1.5  # Gaussian over the (e, f) subregion indices
MARGIN_FACTOR = 12.0 * math.sqrt(2.0)

# Grid offsets in grid units; spacing 1, centered: -11.5 .. +11.5.
GRID_OFFSETS = np.arange(GRID_SIDE, dtype=np.float64) - (GRID_SIDE - 1) / 2.0


def common_orientations(c: int, j: int) -> list[int]:
    """The c shearing indices of scale j nearest the coarse angles pi(1 - q/c).

    theta_k = pi(1 - k/K) equals pi(1 - q/c) exactly at k = q*K/c, which is
    integral whenever c divides K = 4*floor(2**(j/2)); scales with an odd
    shear count per cone (K = 20, 44, ...) cannot represent c = 8 exactly
    and fall back to the nearest lattice index.
    """
    if c < 1:
        raise ValueError("orientation count must be positive")
    k_count = num_shears(j)
    if c > k_count:
        raise ValueError(f"c={c} exceeds the {k_count} shearings of scale {j}")
    return [int(math.floor(q * k_count / c + 0.5)) % k_count for q in range(c)]


def sample_grid(
    keypoint: Keypoint, width: int, height: int
) -> tuple[np.ndarray, list[tuple[int, int, int, int]]]:
    """Grid offsets and subregion layout for one keypoint.

    Returns (offsets, subregions) where offsets is the 24-vector of grid
    coordinates per axis and subregions lists (e, f, start_u, start_v) for
    the 16 overlapping 9x9 blocks. Raises if the keypoint sits closer than
    12*s*sqrt(2) to any border, where the rotated grid could leave the image.
    """
    margin = MARGIN_FACTOR * keypoint.s
    if not (
        margin <= keypoint.x <= width - 1 - margin
        and margin <= keypoint.y <= height - 1 - margin
    ):
        raise ValueError("keypoint too close to the border for the sampling grid")
    subregions = [
        (e, f, su, sv)
        for e, su in zip(SUBREGION_INDICES, SUBREGION_STARTS)
        for f, sv in zip(SUBREGION_INDICES, SUBREGION_STARTS)
    ]
    return GRID_OFFSETS.copy(), subregions


def rotate_frame(u, v, keypoint: Keypoint) -> tuple[np.ndarray, np.ndarray]:
    """Map grid coordinates (u, v) into image coordinates around the keypoint:
    (x, y) = s * R(theta) (u, v) + (kp.x, kp.y)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cos_t = math.cos(keypoint.theta)
    sin_t = math.sin(keypoint.theta)
    x = keypoint.s * (cos_t * u - sin_t * v) + keypoint.x
    y = keypoint.s * (sin_t * u + cos_t * v) + keypoint.y
    return x, y


def shear_shift(k: int, j: int, theta: float) -> int:
    """Circular shearing shift aligning band k with orientation theta:
    t(k) = (k - n_theta) mod K, n_theta = round(theta * K / pi).

    The minus sign makes a view rotated by +theta read the same physical
    directions as the reference view; see the rotation property test.
    """
    k_count = num_shears(j)
    if not 0 <= k < k_count:
        raise ValueError("shearing index out of range")
    n_theta = int(math.floor(theta * k_count / math.pi + 0.5))
    return (k - n_theta) % k_count


def _subregion_weights() -> np.ndarray:
    d = np.arange(SUBREGION_SIDE, dtype=np.float64) - (SUBREGION_SIDE - 1) / 2.0
    g = np.exp(-(d * d) / (2.0 * SAMPLE_SIGMA**2))
    return g[:, None] * g[None, :]

_SAMPLE_WEIGHTS = _subregion_weights()


def _sample_band(band: np.ndarray, keypoint: Keypoint, offsets: np.ndarray) -> np.ndarray:
    u = offsets[None, :]
    v = offsets[:, None]
    x, y = rotate_frame(u, v, keypoint)
    return ndimage.map_coordinates(
        band, [y.ravel(), x.ravel()], order=1, mode="constant", cval=0.0
    ).reshape(GRID_SIDE, GRID_SIDE)


def subregion_stats(
    coeffs: ShearletCoefficients,
    keypoint: Keypoint,
    e: int,
    f: int,
    k: int,
    smooth_shearings: bool = False,
) -> np.ndarray:
    """Signed and absolute weighted coefficient sums for one subregion/shearing.

    Bilinearly samples band t(k) of the keypoint's scale on the subregion's
    9x9 grid block (out-of-image samples contribute 0) and returns
    (sum M*g, sum |M|*g) with g the Gaussian of sigma 2.5 grid units about
    the subregion centroid.
    """
    j = _nearest_scale(keypoint, coeffs.system.num_scales)
    bands = _scale_bands(coeffs, j, smooth_shearings)
    band = bands[shear_shift(k, j, keypoint.theta)]
    try:
        start_u = SUBREGION_STARTS[SUBREGION_INDICES.index(e)]
        start_v = SUBREGION_STARTS[SUBREGION_INDICES.index(f)]
    except ValueError:
        raise ValueError("subregion indices must be in {-2, -1, 1, 2}") from None
    u = GRID_OFFSETS[start_u : start_u + SUBREGION_SIDE][None, :]
    v = GRID_OFFSETS[start_v : start_v + SUBREGION_SIDE][:, None]
    x, y = rotate_frame(u, v, keypoint)
    m = ndimage.map_coordinates(
        band, [y.ravel(), x.ravel()], order=1, mode="constant", cval=0.0
    ).reshape(SUBREGION_SIDE, SUBREGION_SIDE)
    return np.array(
        [float((m * _SAMPLE_WEIGHTS).sum()), float((np.abs(m) * _SAMPLE_WEIGHTS).sum())]
    )


def _nearest_scale(keypoint: Keypoint, num_scales: int) -> int:
    j = int(math.floor(keypoint.jfrac + 0.5))
    return min(max(j, 0), num_scales - 1)


def _scale_bands(coeffs: ShearletCoefficients, j: int, smooth_shearings: bool) -> np.ndarray:
    bands = coeffs.bands[j]
    if smooth_shearings:
        sigma = num_shears(j) / 5.0
        bands = ndimage.gaussian_filter1d(bands, sigma=sigma, axis=0, mode="wrap")
    return bands


def describe(
    coeffs: ShearletCoefficients,
    keypoint: Keypoint,
    c: int = 4,
    smooth_shearings: bool = False,
) -> np.ndarray | None:
    """Length-32c descriptor of one keypoint, or None if it cannot be computed.

    None is returned for keypoints whose sampling grid violates the border
    margin and for flat patches whose raw vector is all zero.
    """
    system = coeffs.system
    j = _nearest_scale(keypoint, system.num_scales)
    try:
        offsets, subregions = sample_grid(keypoint, system.width, system.height)
    except ValueError:
        return None
    selected = common_orientations(c, j)
    bands = _scale_bands(coeffs, j, smooth_shearings)
    samples = [
        _sample_band(bands[shear_shift(k, j, keypoint.theta)], keypoint, offsets)
        for k in selected
    ]
    vec = np.empty(2 * c * len(subregions))
    pos = 0
    for e, f, start_u, start_v in subregions:
        region_weight = math.exp(-(e * e + f * f) / (2.0 * SUBREGION_SIGMA**2))
        rows = slice(start_v, start_v + SUBREGION_SIDE)
        cols = slice(start_u, start_u + SUBREGION_SIDE)
        for grid in samples:
            block = grid[rows, cols]
            vec[pos] = region_weight * float((block * _SAMPLE_WEIGHTS).sum())
            vec[pos + 1] = region_weight * float((np.abs(block) * _SAMPLE_WEIGHTS).sum())
            pos += 2
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return None
    return vec / norm


def describe_all(
    coeffs: ShearletCoefficients,
    keypoints: list[Keypoint],
    c: int = 4,
    smooth_shearings: bool = False,
) -> tuple[list[Keypoint], np.ndarray]:
    """Describe every keypoint that admits a descriptor.

    Returns the surviving keypoints and the (n, 32c) descriptor matrix in
    the same order.
    """
    kept: list[Keypoint] = []
    rows: list[np.ndarray] = []
    for kp in keypoints:
        vec = describe(coeffs, kp, c=c, smooth_shearings=smooth_shearings)
        if vec is not None:
            kept.append(kp)
            rows.append(vec)
    matrix = np.vstack(rows) if rows else np.empty((0, 32 * c))
    return kept, matrix


def format_oxford_descriptors(
    keypoints: list[Keypoint], descriptors: np.ndarray, region_scale: float = 3.0
) -> str:
    """Oxford-style descriptor file: dim line, count line, then per keypoint
    `x y a b c d1 ... d_dim` with the circular region as an ellipse."""
    if len(keypoints) != descriptors.shape[0]:
        raise ValueError("keypoint/descriptor count mismatch")
    dim = descriptors.shape[1] if descriptors.size else 0
    lines = [str(dim), str(len(keypoints))]
    for kp, vec in zip(keypoints, descriptors):
        inv = 1.0 / (region_scale * kp.s) ** 2
        values = " ".join(f"{v:.9g}" for v in vec)
        lines.append(f"{kp.x:.9g} {kp.y:.9g} {inv:.9g} 0 {inv:.9g} {values}")
    return "\n".join(lines) + "\n"


def parse_oxford_descriptors(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse an Oxford-style descriptor file.

    Returns (regions, descriptors): regions is (n, 5) rows `x y a b c`,
    descriptors is (n, dim).
    """
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("truncated descriptor file")
    dim = int(float(tokens[0]))
    count = int(float(tokens[1]))
    expected = 2 + count * (5 + dim)
    if len(tokens) != expected:
        raise ValueError(
            f"descriptor file has {len(tokens)} tokens, expected {expected}"
        )
    data = np.asarray(tokens[2:], dtype=np.float64).reshape(count, 5 + dim)
    return data[:, :5], data[:, 5:]
