"""Descriptor matching and homography-based evaluation metrics.

Implements the standard affine-region evaluation protocol: keypoints carry
circular measurement regions (radius 3s), regions are projected through the
local affine approximation of a ground-truth homography, and pairs count as
corresponding when the region overlap error stays below a bound (default
0.4). On top of that sit repeatability, threshold / nearest-neighbor
matching, precision-recall sweeps, and the matching score.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .image_io import Image, load_homography, load_image

DEFAULT_OVERLAP_MAX = 0.4
REGION_RADIUS_FACTOR = 3.0
RASTER_STEPS = 100


@dataclass(frozen=True)
class Region:
    """Measurement region {p : a*dx^2 + 2b*dx*dy + c*dy^2 <= 1} around (x, y).

    Matches the Oxford region-file convention; a circle of radius r has
    a = c = 1/r^2, b = 0.
    """

    x: float
    y: float
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.det <= 0.0 or self.a <= 0.0:
            raise ValueError("region matrix must be positive definite")

    @property
    def det(self) -> float:
        return self.a * self.c - self.b * self.b

    @property
    def area(self) -> float:
        return math.pi / math.sqrt(self.det)

    @property
    def is_circle(self) -> bool:
        scale = max(abs(self.a), abs(self.c))
        return abs(self.b) <= 1e-12 * scale and abs(self.a - self.c) <= 1e-12 * scale

    @property
    def radius(self) -> float:
        # geometric mean of the semi-axes; exact radius for circles
        return self.det ** -0.25

    def bbox(self) -> tuple[float, float, float, float]:
        hw = math.sqrt(self.c / self.det)
        hh = math.sqrt(self.a / self.det)
        return (self.x - hw, self.y - hh, self.x + hw, self.y + hh)

    @classmethod
    def circle(cls, x: float, y: float, r: float) -> "Region":
        inv = 1.0 / (r * r)
        return cls(x=x, y=y, a=inv, b=0.0, c=inv)


@dataclass(frozen=True)
class MatchSet:
    """Descriptor match list: (indexA, indexB, distance) triples."""

    pairs: tuple[tuple[int, int, float], ...]
    strategy: str
    threshold: float | None

    def __post_init__(self):
        if self.strategy not in ("threshold", "nearest-neighbor"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        seen = set()
        for ia, ib, dist in self.pairs:
            if dist < 0.0:
                raise ValueError("distances must be non-negative")
            if (ia, ib) in seen:
                raise ValueError("duplicate match pair")
            seen.add((ia, ib))


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metrics for one image pair under a known homography."""

    correspondences: int
    correct_matches: int
    false_matches: int
    repeatability: float
    matching_score: float
    pr_samples: tuple[tuple[float, float], ...]
    no_visible: bool = False

    def __post_init__(self):
        if not 0.0 <= self.repeatability <= 1.0:
            raise ValueError("repeatability must lie in [0, 1]")
        for recall, one_minus_precision in self.pr_samples:
            if not (0.0 <= recall <= 1.0 and 0.0 <= one_minus_precision <= 1.0):
                raise ValueError("PR samples must lie in [0, 1]")

    @property
    def total_matches(self) -> int:
        return self.correct_matches + self.false_matches


def region_for(kp) -> Region:
    """Circular measurement region of a keypoint: radius 3 * pixel scale."""
    return Region.circle(kp.x, kp.y, REGION_RADIUS_FACTOR * kp.s)


def project_point(hom: np.ndarray, x: float, y: float) -> tuple[float, float]:
    p = hom @ np.array([x, y, 1.0])
    if abs(p[2]) < 1e-15:
        raise ValueError("point maps to infinity")
    return float(p[0] / p[2]), float(p[1] / p[2])


def local_affine(hom: np.ndarray, x: float, y: float) -> np.ndarray:
    """2x2 Jacobian of the projective map at (x, y)."""
    w = hom[2, 0] * x + hom[2, 1] * y + hom[2, 2]
    if abs(w) < 1e-15:
        raise ValueError("point maps to infinity")
    xp = (hom[0, 0] * x + hom[0, 1] * y + hom[0, 2]) / w
    yp = (hom[1, 0] * x + hom[1, 1] * y + hom[1, 2]) / w
    return (
        np.array(
            [
                [hom[0, 0] - xp * hom[2, 0], hom[0, 1] - xp * hom[2, 1]],
                [hom[1, 0] - yp * hom[2, 0], hom[1, 1] - yp * hom[2, 1]],
            ]
        )
        / w
    )


def project_region(region: Region, hom: np.ndarray) -> Region:
    """Map a region through the local affine approximation of a homography.

    With region matrix M and affine Jacobian A, the image has matrix
    A^{-T} M A^{-1} around the projected center.
    """
    cx, cy = project_point(hom, region.x, region.y)
    jac = local_affine(hom, region.x, region.y)
    m = np.array([[region.a, region.b], [region.b, region.c]])
    inv = np.linalg.inv(jac)
    m2 = inv.T @ m @ inv
    return Region(x=cx, y=cy, a=float(m2[0, 0]), b=float(m2[0, 1]), c=float(m2[1, 1]))


def _circle_overlap_error(ra: Region, rb: Region) -> float:
    r1 = ra.radius
    r2 = rb.radius
    d = math.hypot(ra.x - rb.x, ra.y - rb.y)
    if d >= r1 + r2:
        return 1.0
    if d <= abs(r1 - r2):
        inter = math.pi * min(r1, r2) ** 2
    else:
        q1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)
        q2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)
        kite = 0.5 * math.sqrt(
            max(
                0.0,
                (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2),
            )
        )
        inter = r1 * r1 * math.acos(max(-1.0, min(1.0, q1)))
        inter += r2 * r2 * math.acos(max(-1.0, min(1.0, q2)))
        inter -= kite
    union = math.pi * (r1 * r1 + r2 * r2) - inter
    return 1.0 - inter / union


def overlap_error(ra: Region, rb: Region) -> float:
    """1 - intersection/union of two regions.

    Circle pairs use the closed-form lens area so that exact fixtures (for
    example concentric circles with radius ratio 2 -> 0.75) hold to the last
    bit; general ellipse pairs fall back to area estimation on a 100x100
    grid over the union's bounding box.
    """
    if ra.is_circle and rb.is_circle:
        return _circle_overlap_error(ra, rb)
    ax0, ay0, ax1, ay1 = ra.bbox()
    bx0, by0, bx1, by1 = rb.bbox()
    x0, y0 = min(ax0, bx0), min(ay0, by0)
    x1, y1 = max(ax1, bx1), max(ay1, by1)
    xs = x0 + (np.arange(RASTER_STEPS) + 0.5) * (x1 - x0) / RASTER_STEPS
    ys = y0 + (np.arange(RASTER_STEPS) + 0.5) * (y1 - y0) / RASTER_STEPS
    gx, gy = np.meshgrid(xs, ys)

    def inside(r: Region) -> np.ndarray:
        dx = gx - r.x
        dy = gy - r.y
        return r.a * dx * dx + 2.0 * r.b * dx * dy + r.c * dy * dy <= 1.0

    in_a = inside(ra)
    in_b = inside(rb)
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        raise ValueError("degenerate regions: empty union raster")
    inter = int(np.count_nonzero(in_a & in_b))
    return 1.0 - inter / union


def _visible(region: Region, width: int, height: int) -> bool:
    # projected center must sit at least one mean radius inside the frame
    r = region.radius
    return (
        r <= region.x <= width - 1 - r and r <= region.y <= height - 1 - r
    )


def correspondences(
    kps_a,
    kps_b,
    hom: np.ndarray,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> tuple[list[tuple[int, int, float]], int, int]:
    """Greedy one-to-one region correspondences under a homography.

    Projects every A-region into frame B, keeps keypoints visible in both
    frames, and assigns pairs in ascending overlap error up to overlap_max.
    Returns (pairs, #visible A, #visible B); pairs are (indexA, indexB,
    overlap error) over the original keypoint indices.
    """
    inv = np.linalg.inv(hom)
    wa, ha = size_a
    wb, hb = size_b
    proj_a: dict[int, Region] = {}
    for i, kp in enumerate(kps_a):
        try:
            proj = project_region(region_for(kp), hom)
        except ValueError:
            continue
        if _visible(proj, wb, hb):
            proj_a[i] = proj
    vis_b = []
    for i, kp in enumerate(kps_b):
        try:
            back = project_region(region_for(kp), inv)
        except ValueError:
            continue
        if _visible(back, wa, ha):
            vis_b.append(i)
    candidates = []
    for ia, proj in proj_a.items():
        for ib in vis_b:
            err = overlap_error(proj, region_for(kps_b[ib]))
            if err <= overlap_max:
                candidates.append((err, ia, ib))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs = []
    for err, ia, ib in candidates:
        if ia in used_a or ib in used_b:
            continue
        used_a.add(ia)
        used_b.add(ib)
        pairs.append((ia, ib, err))
    return pairs, len(proj_a), len(vis_b)


def repeatability(
    kps_a,
    kps_b,
    hom: np.ndarray,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> tuple[float, list[tuple[int, int, float]], bool]:
    """Repeatability score RS = #correspondences / min(#visible A, #visible B).

    Returns (RS, correspondence list, no-visible flag); with no visible
    keypoints on either side RS is defined as 0 and the flag set.
    """
    pairs, nvis_a, nvis_b = correspondences(
        kps_a, kps_b, hom, size_a, size_b, overlap_max
    )
    denom = min(nvis_a, nvis_b)
    if denom == 0:
        return 0.0, [], True
    return len(pairs) / denom, pairs, False


def _distance_matrix(descs_a: np.ndarray, descs_b: np.ndarray) -> np.ndarray:
    a = np.asarray(descs_a, dtype=np.float64)
    b = np.asarray(descs_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("descriptor dimensions do not match")
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
    d2 -= 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(d2, 0.0))


def match(
    descs_a: np.ndarray,
    descs_b: np.ndarray,
    strategy: str = "threshold",
    tau: float = 0.25,
) -> MatchSet:
    """Match descriptors by Euclidean distance.

    threshold: every pair with distance strictly below tau.
    nearest-neighbor: each A row's closest B row (ties break to the lowest
    B index); tau is ignored.
    """
    dmat = _distance_matrix(descs_a, descs_b)
    pairs: list[tuple[int, int, float]] = []
    if strategy == "threshold":
        for ia, ib in np.argwhere(dmat < tau):
            pairs.append((int(ia), int(ib), float(dmat[ia, ib])))
        return MatchSet(pairs=tuple(pairs), strategy="threshold", threshold=tau)
    if strategy == "nearest-neighbor":
        for ia in range(dmat.shape[0]):
            ib = int(np.argmin(dmat[ia]))
            pairs.append((ia, ib, float(dmat[ia, ib])))
        return MatchSet(pairs=tuple(pairs), strategy="nearest-neighbor", threshold=None)
    raise ValueError(f"unknown strategy {strategy!r}")


def pr_curve(
    descs_a: np.ndarray,
    descs_b: np.ndarray,
    corr_pairs: list[tuple[int, int, float]],
) -> tuple[list[tuple[float, float]], bool]:
    """Recall vs 1-precision sweep of the threshold matcher.

    The threshold runs over the sorted distinct pairwise distances
    (inclusive, so the final point admits every pair). A match is correct
    iff its index pair appears in the ground-truth correspondence list.
    Returns (samples, defined); zero correspondences yield an empty curve
    with defined=False.
    """
    truth = {(ia, ib) for ia, ib, _ in corr_pairs}
    n_corr = len(truth)
    if n_corr == 0:
        return [], False
    dmat = _distance_matrix(descs_a, descs_b)
    correct_mask = np.zeros(dmat.shape, dtype=bool)
    for ia, ib in truth:
        if ia < dmat.shape[0] and ib < dmat.shape[1]:
            correct_mask[ia, ib] = True
    flat = dmat.ravel()
    order = np.argsort(flat, kind="stable")
    correct_flat = correct_mask.ravel()[order]
    sorted_d = flat[order]
    cum_correct = np.cumsum(correct_flat)
    samples: list[tuple[float, float]] = []
    total = len(sorted_d)
    idx = 0
    while idx < total:
        tau = sorted_d[idx]
        # advance through ties so every threshold is inclusive
        hi = idx
        while hi + 1 < total and sorted_d[hi + 1] == tau:
            hi += 1
        n_matches = hi + 1
        n_correct = int(cum_correct[hi])
        recall = n_correct / n_corr
        one_minus_precision = (n_matches - n_correct) / n_matches
        samples.append((recall, one_minus_precision))
        idx = hi + 1
    return samples, True


def matching_score(
    kps_a,
    kps_b,
    descs_a: np.ndarray,
    descs_b: np.ndarray,
    hom: np.ndarray,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> tuple[float, int, int, bool]:
    """MS = #correct nearest-neighbor matches / min(#visible A, #visible B).

    A nearest-neighbor match is correct when its index pair is one of the
    region correspondences. Returns (MS, correct, false, no-visible flag).
    """
    pairs, nvis_a, nvis_b = correspondences(
        kps_a, kps_b, hom, size_a, size_b, overlap_max
    )
    denom = min(nvis_a, nvis_b)
    if denom == 0:
        return 0.0, 0, 0, True
    truth = {(ia, ib) for ia, ib, _ in pairs}
    nn = match(descs_a, descs_b, strategy="nearest-neighbor")
    correct = sum((ia, ib) in truth for ia, ib, _ in nn.pairs)
    false = len(nn.pairs) - correct
    return correct / denom, correct, false, False


def evaluate_pair(
    kps_a,
    kps_b,
    descs_a: np.ndarray,
    descs_b: np.ndarray,
    hom: np.ndarray,
    size_a: tuple[int, int],
    size_b: tuple[int, int],
    overlap_max: float = DEFAULT_OVERLAP_MAX,
) -> EvalReport:
    """Full metric bundle for one image pair."""
    rs, pairs, warn = repeatability(kps_a, kps_b, hom, size_a, size_b, overlap_max)
    ms, correct, false, _ = matching_score(
        kps_a, kps_b, descs_a, descs_b, hom, size_a, size_b, overlap_max
    )
    samples, _ = pr_curve(descs_a, descs_b, pairs)
    return EvalReport(
        correspondences=len(pairs),
        correct_matches=correct,
        false_matches=false,
        repeatability=rs,
        matching_score=ms,
        pr_samples=tuple(samples),
        no_visible=warn,
    )


def read_oxford_sequence(path: str) -> tuple[list[Image], dict[int, np.ndarray]]:
    """Load an Oxford-layout sequence: img1..imgN plus H1to<N>p files.

    Returns (images, {n: H mapping img1 coordinates into img<n>}).
    """
    images: list[Image] = []
    n = 1
    while True:
        hits = [
            os.path.join(path, f"img{n}{ext}")
            for ext in (".pgm", ".png", ".ppm")
            if os.path.exists(os.path.join(path, f"img{n}{ext}"))
        ]
        if not hits:
            break
        images.append(load_image(hits[0]))
        n += 1
    if not images:
        raise FileNotFoundError(f"no img<N> files under {path}")
    homs: dict[int, np.ndarray] = {}
    for m in range(2, len(images) + 1):
        hfile = os.path.join(path, f"H1to{m}p")
        if os.path.exists(hfile):
            homs[m] = load_homography(hfile)
    return images, homs
