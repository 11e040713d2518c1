"""Blob detection on the shearlet coefficient volume.

The pipeline: the per-scale coefficient sum is collapsed into the real
blob-response volume B(m, j); strict 3x3x3 extrema of B are refined to
subpixel position and fractional scale by quadratic interpolation; an
edge measure computed from the spread of per-shearing responses rejects
elongated structures; surviving points get a parabola-interpolated
orientation from the dominant shearing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image_io import Image
from .system import (
    ShearletCoefficients,
    cached_system,
    num_shears,
    orientation_angle,
    transform,
)

__all__ = [
    "BVolume",
    "Keypoint",
    "b_measure",
    "find_extrema",
    "refine",
    "edge_response",
    "assign_orientation",
    "detect",
    "format_keypoints",
    "parse_keypoints",
    "format_oxford_regions",
]

# Candidates closer than this to any image border are discarded; the
# descriptor support would leave the raster immediately.
BORDER_MARGIN = 8

DEFAULT_THRESHOLD_FRACTION = 0.01
DEFAULT_EDGE_PERCENTILE = 75.0
MAX_REFINE_STEPS = 5


@dataclass(frozen=True, eq=False)
class BVolume:
    """Blob-response volume, values[j, y, x], with per-scale normalizers C_j."""

    values: np.ndarray
    normalizers: tuple[int, ...]

    @property
    def num_scales(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Keypoint:
    """Detected blob: subpixel center, fractional scale, orientation.

    s = 2**(num_scales - jfrac) is the pixel scale of the selected band.
    Detection emits theta in (0, pi]; the carrier accepts any angle in
    (0, 2*pi] so that frames mapped through a known rotation can keep the
    unfolded representative (the descriptor grid flips sign under
    theta -> theta + pi, so the fold is not free). response is the
    interpolated B value and epsilon the edge measure at the detection
    lattice point.
    """

    x: float
    y: float
    jfrac: float
    s: float
    theta: float
    response: float
    epsilon: float

    def __post_init__(self):
        if not (self.s > 0.0 and np.isfinite(self.s)):
            raise ValueError("pixel scale must be positive and finite")
        if not 0.0 < self.theta <= 2.0 * math.pi + 1e-12:
            raise ValueError("orientation must lie in (0, 2*pi]")
        if self.epsilon < 0.0:
            raise ValueError("edge measure must be non-negative")


def b_measure(coeffs: ShearletCoefficients) -> BVolume:
    """Scale-normalized coefficient sum B(m,j) = 2^{5j/4}/C_j * sum_k SH(j,k,m).

    C_j = 4*floor(2**(j/2)) is the shearing count of scale j. Summation is
    over signed coefficients: opposing orientations may cancel, which is
    what suppresses straight edges relative to blobs.
    """
    system = coeffs.system
    out = np.empty((system.num_scales, system.height, system.width))
    normalizers = []
    for j, bands in enumerate(coeffs.bands):
        c_j = num_shears(j)
        normalizers.append(c_j)
        out[j] = (2.0 ** (1.25 * j) / c_j) * bands.sum(axis=0)
    return BVolume(values=out, normalizers=tuple(normalizers))


def find_extrema(bvol: BVolume, threshold: float) -> list[tuple[int, int, int]]:
    """Strict 3x3x3 extrema of B with |B| > threshold, as (j, y, x) triples.

    Only interior points qualify: scales 1..num_scales-2 and a one-pixel
    spatial border are excluded, since refinement needs a full neighborhood.
    Plateau ties produce no candidate.
    """
    if threshold < 0.0:
        raise ValueError("threshold must be non-negative")
    if bvol.num_scales < 3:
        raise ValueError("need at least 3 scales for a 3x3x3 neighborhood")
    vals = bvol.values
    footprint = np.ones((3, 3, 3), dtype=bool)
    footprint[1, 1, 1] = False
    neigh_max = ndimage.maximum_filter(vals, footprint=footprint, mode="nearest")
    neigh_min = ndimage.minimum_filter(vals, footprint=footprint, mode="nearest")
    mask = ((vals > neigh_max) | (vals < neigh_min)) & (np.abs(vals) > threshold)
    mask[0] = mask[-1] = False
    mask[:, :1, :] = mask[:, -1:, :] = False
    mask[:, :, :1] = mask[:, :, -1:] = False
    return [tuple(idx) for idx in np.argwhere(mask)]


def _interior(j: int, y: int, x: int, shape: tuple[int, int, int]) -> bool:
    nj, ny, nx = shape
    return 1 <= j <= nj - 2 and 1 <= y <= ny - 2 and 1 <= x <= nx - 2


def refine(
    candidate: tuple[int, int, int], bvol: BVolume
) -> tuple[float, float, float, float, tuple[int, int, int]] | None:
    """Subpixel/subscale refinement of one extremum candidate.

    Fits a quadratic to B around the lattice point from central-difference
    gradient and Hessian and solves for the vertex offset. An offset beyond
    half a sample in any coordinate moves the anchor one lattice step and
    retries, up to MAX_REFINE_STEPS times. A move that revisits an anchor
    means the vertex sits on the boundary between two samples and the
    offsets will alternate forever; the offset is then clamped to half a
    sample and accepted. Returns (x, y, jfrac, response, final lattice
    point), or None for candidates that escape the interior, drift past the
    step limit, or yield a singular Hessian.
    """
    vals = bvol.values
    j, y, x = candidate
    visited = set()
    for _ in range(MAX_REFINE_STEPS):
        if not _interior(j, y, x, vals.shape):
            return None
        visited.add((j, y, x))
        cube = vals[j - 1 : j + 2, y - 1 : y + 2, x - 1 : x + 2]
        g = 0.5 * np.array(
            [
                cube[1, 1, 2] - cube[1, 1, 0],
                cube[1, 2, 1] - cube[1, 0, 1],
                cube[2, 1, 1] - cube[0, 1, 1],
            ]
        )
        c = cube[1, 1, 1]
        dxx = cube[1, 1, 2] - 2 * c + cube[1, 1, 0]
        dyy = cube[1, 2, 1] - 2 * c + cube[1, 0, 1]
        djj = cube[2, 1, 1] - 2 * c + cube[0, 1, 1]
        dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
        dxj = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
        dyj = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
        hess = np.array([[dxx, dxy, dxj], [dxy, dyy, dyj], [dxj, dyj, djj]])
        try:
            delta = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        x2, y2, j2 = x, y, j
        if abs(delta[0]) > 0.5:
            x2 += 1 if delta[0] > 0 else -1
        if abs(delta[1]) > 0.5:
            y2 += 1 if delta[1] > 0 else -1
        if abs(delta[2]) > 0.5:
            j2 += 1 if delta[2] > 0 else -1
        if (x2, y2, j2) == (x, y, j) or (j2, y2, x2) in visited:
            delta = np.clip(delta, -0.5, 0.5)
            response = c + 0.5 * float(g @ delta)
            return (
                x + float(delta[0]),
                y + float(delta[1]),
                j + float(delta[2]),
                response,
                (j, y, x),
            )
        x, y, j = x2, y2, j2
    return None


def edge_response(coeffs: ShearletCoefficients, m: tuple[int, int], j: int) -> float:
    """Edge measure: mean squared spread of shearing responses around the
    dominant one, eps = (1/K) * |sum_k (SH_k - SH_kmax)^2|.

    Straight edges excite a broad fan of shearings away from the dominant
    orientation (large eps); blobs respond nearly equally in all shearings
    (small eps).
    """
    y, x = m
    v = coeffs.bands[j][:, y, x]
    kmax = int(np.argmax(np.abs(v)))
    k_count = num_shears(j)
    return float(abs(((v - v[kmax]) ** 2).sum()) / k_count)


def assign_orientation(coeffs: ShearletCoefficients, m: tuple[int, int], j: int) -> float:
    """Orientation from a 3-point parabola over |SH| around the dominant shearing.

    The vertex of the parabola through the dominant shearing and its two
    circular neighbors, on the uniform angle lattice theta_k = pi(1 - k/K),
    folded into (0, pi]. A degenerate (collinear) triplet keeps theta_kmax.
    """
    y, x = m
    mags = np.abs(coeffs.bands[j][:, y, x])
    k_count = mags.shape[0]
    kmax = int(np.argmax(mags))
    left = mags[(kmax - 1) % k_count]
    mid = mags[kmax]
    right = mags[(kmax + 1) % k_count]
    denom = left - 2.0 * mid + right
    offset = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
    theta = float(orientation_angle(j, kmax + offset))
    theta = theta % math.pi
    if theta <= 0.0:
        theta += math.pi
    return theta


def detect(
    image: Image | np.ndarray,
    threshold: float | None = None,
    edge_threshold: float | None = None,
    num_scales: int | None = None,
    threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION,
    edge_percentile: float = DEFAULT_EDGE_PERCENTILE,
) -> list[Keypoint]:
    """Run the full blob detector on one image.

    threshold None selects threshold_fraction * max|B| for the image at
    hand; edge_threshold None selects the edge_percentile-th percentile of
    the edge measure over refined candidates (default 75, so a quarter of
    them is always pruned). Keypoints come back sorted by |response|
    descending (ties by (y, x)).
    """
    pixels = image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)
    height, width = pixels.shape
    system = cached_system(width, height, num_scales)
    coeffs = transform(pixels, system)
    bvol = b_measure(coeffs)
    if threshold is None:
        threshold = threshold_fraction * float(np.abs(bvol.values).max())
    candidates = find_extrema(bvol, threshold)
    refined = []
    for j, y, x in candidates:
        if not (
            BORDER_MARGIN <= x <= width - 1 - BORDER_MARGIN
            and BORDER_MARGIN <= y <= height - 1 - BORDER_MARGIN
        ):
            continue
        result = refine((j, y, x), bvol)
        if result is None:
            continue
        rx, ry, rj, response, anchor = result
        if abs(response) <= threshold:
            continue
        if not (
            BORDER_MARGIN <= rx <= width - 1 - BORDER_MARGIN
            and BORDER_MARGIN <= ry <= height - 1 - BORDER_MARGIN
        ):
            continue
        aj, ay, ax = anchor
        eps = edge_response(coeffs, (ay, ax), aj)
        refined.append((rx, ry, rj, response, anchor, eps))
    if not refined:
        return []
    if edge_threshold is None:
        edge_threshold = float(np.percentile([r[5] for r in refined], edge_percentile))
    keypoints = []
    for rx, ry, rj, response, (aj, ay, ax), eps in refined:
        if eps > edge_threshold:
            continue
        theta = assign_orientation(coeffs, (ay, ax), aj)
        keypoints.append(
            Keypoint(
                x=rx,
                y=ry,
                jfrac=rj,
                s=2.0 ** (system.num_scales - rj),
                theta=theta,
                response=response,
                epsilon=eps,
            )
        )
    keypoints.sort(key=lambda kp: (-abs(kp.response), kp.y, kp.x))
    return keypoints


def format_keypoints(keypoints: list[Keypoint]) -> str:
    """One keypoint per line: x y s theta response epsilon."""
    lines = [
        f"{kp.x:.9g} {kp.y:.9g} {kp.s:.9g} {kp.theta:.9g} "
        f"{kp.response:.9g} {kp.epsilon:.9g}"
        for kp in keypoints
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_keypoints(text: str, num_scales: int | None = None) -> list[Keypoint]:
    """Inverse of format_keypoints.

    The file stores s, not jfrac; with num_scales given, jfrac is rebuilt
    as num_scales - log2(s) (exact for values written by format_keypoints),
    otherwise it is left NaN and the keypoint cannot be described.
    """
    keypoints = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"expected 6 fields per keypoint line, got {len(parts)}")
        x, y, s, theta, response, epsilon = map(float, parts)
        jfrac = math.nan if num_scales is None else num_scales - math.log2(s)
        keypoints.append(
            Keypoint(
                x=x,
                y=y,
                jfrac=jfrac,
                s=s,
                theta=theta,
                response=response,
                epsilon=epsilon,
            )
        )
    return keypoints


def format_oxford_regions(keypoints: list[Keypoint], region_scale: float = 3.0) -> str:
    """Oxford-style region file: header '1.0', count, then `x y 1/r^2 0 1/r^2`.

    Circles of radius region_scale * s encoded as axis-aligned ellipses
    a*x^2 + 2b*x*y + c*y^2 = 1 with a = c = 1/r^2, b = 0.
    """
    lines = ["1.0", str(len(keypoints))]
    for kp in keypoints:
        inv = 1.0 / (region_scale * kp.s) ** 2
        lines.append(f"{kp.x:.9g} {kp.y:.9g} {inv:.9g} 0 {inv:.9g}")
    return "\n".join(lines) + "\n"
