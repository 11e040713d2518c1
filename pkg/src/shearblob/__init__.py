"""Scale-invariant blob detection and local description with cone-adapted shearlets."""

__version__ = "0.1.0"

from .image_io import Image, load_image, save_image, load_homography, save_homography
from .system import (
    ShearletSystem,
    ShearletCoefficients,
    build_system,
    cached_system,
    transform,
)
from .detector import (
    BVolume,
    Keypoint,
    b_measure,
    detect,
    edge_response,
    find_extrema,
    format_keypoints,
    parse_keypoints,
    refine,
)
from .descriptor import (
    describe,
    describe_all,
    format_oxford_descriptors,
    parse_oxford_descriptors,
)
from .matching import (
    EvalReport,
    MatchSet,
    Region,
    correspondences,
    evaluate_pair,
    match,
    matching_score,
    overlap_error,
    pr_curve,
    repeatability,
)
from .theory import (
    ScaleCurve,
    SyntheticSpec,
    bmax_argmax,
    bmax_theoretical,
    empirical_bmax,
    gaussian_scale_space_curve,
    laplacian_argmax,
    laplacian_max_theoretical,
    scale_invariance_check,
    synth,
)
from .cli import RunConfig, main

__all__ = [
    "__version__",
    "Image",
    "load_image",
    "save_image",
    "load_homography",
    "save_homography",
    "ShearletSystem",
    "ShearletCoefficients",
    "build_system",
    "cached_system",
    "transform",
    "BVolume",
    "Keypoint",
    "b_measure",
    "detect",
    "edge_response",
    "find_extrema",
    "format_keypoints",
    "parse_keypoints",
    "refine",
    "describe",
    "describe_all",
    "format_oxford_descriptors",
    "parse_oxford_descriptors",
    "EvalReport",
    "MatchSet",
    "Region",
    "correspondences",
    "evaluate_pair",
    "match",
    "matching_score",
    "overlap_error",
    "pr_curve",
    "repeatability",
    "ScaleCurve",
    "SyntheticSpec",
    "bmax_argmax",
    "bmax_theoretical",
    "empirical_bmax",
    "gaussian_scale_space_curve",
    "laplacian_argmax",
    "laplacian_max_theoretical",
    "scale_invariance_check",
    "synth",
    "RunConfig",
    "main",
]
