"""Command-line pipeline: detect, describe, match, bench, theory.

Every subcommand is a pure function of its input files and the resolved
RunConfig: reruns with identical inputs produce byte-identical outputs.
Reports embed the fully resolved configuration, floats print with 9
significant digits, and nothing in the pipeline draws randomness.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .descriptor import describe_all, format_oxford_descriptors
from .detector import detect, format_keypoints, parse_keypoints
from .image_io import Image, load_homography, load_image
from .matching import (
    correspondences,
    match as match_descriptors,
    matching_score,
    pr_curve,
    read_oxford_sequence,
    repeatability,
)
from .system import cached_system, default_num_scales, transform
from .theory import (
    SQRT2_NOTE,
    SyntheticSpec,
    bmax_argmax,
    empirical_bmax,
    format_curve_csv,
    gaussian_scale_space_curve,
    laplacian_argmax,
    synth,
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved pipeline configuration; round-trips through key=value text.

    j0 = 0 picks the per-image default scale count. threshold_mode
    'fraction' reads threshold as a fraction of max|B|, 'absolute' as a raw
    bound; edge_threshold_mode works the same way with 'percentile' /
    'absolute'. random_free only asserts that the pipeline is
    deterministic; it cannot be turned off.
    """

    j0: int = 0
    threshold_mode: str = "fraction"
    threshold: float = 0.01
    edge_threshold_mode: str = "percentile"
    edge_threshold: float = 75.0
    c: int = 4
    strategy: str = "threshold"
    tau: float = 0.25
    overlap_max: float = 0.4
    out: str = "."
    random_free: bool = True

    def __post_init__(self):
        if self.threshold_mode not in ("fraction", "absolute"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.edge_threshold_mode not in ("percentile", "absolute"):
            raise ValueError(
                f"unknown edge_threshold_mode {self.edge_threshold_mode!r}"
            )
        if self.strategy not in ("threshold", "nearest-neighbor"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.c < 1:
            raise ValueError("c must be at least 1")
        if not 0.0 < self.overlap_max < 1.0:
            raise ValueError("overlap_max must lie in (0, 1)")
        if self.j0 < 0:
            raise ValueError("j0 must be non-negative (0 = automatic)")
        if not self.random_free:
            raise ValueError("the pipeline is deterministic; random_free stays true")


def parse_config(text: str) -> RunConfig:
    """Parse flat `key = value` lines; unknown keys are rejected."""
    by_name = {f.name: f for f in fields(RunConfig)}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in by_name:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        ftype = by_name[key].type
        if ftype in ("bool", bool):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(f"config line {lineno}: bad boolean {value!r}")
            overrides[key] = value.lower() in ("true", "1")
        elif ftype in ("int", int):
            overrides[key] = int(value)
        elif ftype in ("float", float):
            overrides[key] = float(value)
        else:
            overrides[key] = value
    return RunConfig(**overrides)


def format_config(config: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = f"{value:.9g}"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def _config_dict(config: RunConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(RunConfig)}


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return obj


def _write_text(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _write_json(path: str, payload: dict) -> None:
    _write_text(path, json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n")


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _num_scales_for(image: Image, config: RunConfig) -> int:
    if config.j0:
        return config.j0
    return default_num_scales(image.width, image.height)


def _detect(image: Image, config: RunConfig):
    kwargs = {"num_scales": _num_scales_for(image, config)}
    if config.threshold_mode == "fraction":
        kwargs["threshold_fraction"] = config.threshold
    else:
        kwargs["threshold"] = config.threshold
    if config.edge_threshold_mode == "percentile":
        kwargs["edge_percentile"] = config.edge_threshold
    else:
        kwargs["edge_threshold"] = config.edge_threshold
    return detect(image, **kwargs)


def _features(image: Image, config: RunConfig):
    """Detect and describe one image: (all keypoints, described subset, matrix)."""
    kps = _detect(image, config)
    system = cached_system(image.width, image.height, _num_scales_for(image, config))
    coeffs = transform(image, system)
    kept, descs = describe_all(coeffs, kps, c=config.c)
    return kps, kept, descs


def _features_many(images: list[Image], config: RunConfig):
    """Per-image features, computed in parallel, returned in input order."""
    if len(images) <= 1:
        return [_features(image, config) for image in images]
    workers = min(len(images), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda image: _features(image, config), images))


def _resolve_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        with open(args.config) as fh:
            config = parse_config(fh.read())
    overrides = {}
    if args.j0 is not None:
        overrides["j0"] = args.j0
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.edge_threshold is not None:
        overrides["edge_threshold"] = args.edge_threshold
    if args.c is not None:
        overrides["c"] = args.c
    if args.tau is not None:
        overrides["tau"] = args.tau
    if args.overlap_max is not None:
        overrides["overlap_max"] = args.overlap_max
    if args.out is not None:
        overrides["out"] = args.out
    return replace(config, **overrides) if overrides else config


def cmd_detect(args) -> int:
    config = _resolve_config(args)
    image = load_image(args.image)
    keypoints = _detect(image, config)
    os.makedirs(config.out, exist_ok=True)
    stem = _stem(args.image)
    kp_path = os.path.join(config.out, f"{stem}.keypoints.txt")
    _write_text(kp_path, format_keypoints(keypoints))
    report = {
        "command": "detect",
        "image": args.image,
        "num_scales": _num_scales_for(image, config),
        "count": len(keypoints),
        "keypoints_file": kp_path,
        "config": _config_dict(config),
    }
    json_path = os.path.join(config.out, f"{stem}.detect.json")
    _write_json(json_path, report)
    print(f"{len(keypoints)} keypoints -> {kp_path}")
    return 0


def cmd_describe(args) -> int:
    config = _resolve_config(args)
    image = load_image(args.image)
    if args.keypoints:
        with open(args.keypoints) as fh:
            keypoints = parse_keypoints(fh.read(), _num_scales_for(image, config))
    else:
        keypoints = _detect(image, config)
    system = cached_system(image.width, image.height, _num_scales_for(image, config))
    coeffs = transform(image, system)
    kept, descs = describe_all(coeffs, keypoints, c=config.c)
    os.makedirs(config.out, exist_ok=True)
    stem = _stem(args.image)
    desc_path = os.path.join(config.out, f"{stem}.descriptors.txt")
    _write_text(desc_path, format_oxford_descriptors(kept, descs))
    report = {
        "command": "describe",
        "image": args.image,
        "num_scales": _num_scales_for(image, config),
        "keypoints_in": len(keypoints),
        "described": len(kept),
        "dropped": len(keypoints) - len(kept),
        "dimension": int(descs.shape[1]) if descs.size else 32 * config.c,
        "descriptors_file": desc_path,
        "config": _config_dict(config),
    }
    _write_json(os.path.join(config.out, f"{stem}.describe.json"), report)
    print(f"{len(kept)} descriptors ({len(keypoints) - len(kept)} dropped) -> {desc_path}")
    return 0


def _pair_report(feat_a, size_a, feat_b, size_b, hom, config: RunConfig) -> dict:
    """Protocol metrics for one pair: repeatability over all detections,
    matching score and precision/recall over the described subset."""
    kps_a, kept_a, descs_a = feat_a
    kps_b, kept_b, descs_b = feat_b
    rs, rs_pairs, rs_flag = repeatability(
        kps_a, kps_b, hom, size_a, size_b, config.overlap_max
    )
    ms, correct, false, ms_flag = matching_score(
        kept_a,
        kept_b,
        descs_a,
        descs_b,
        hom,
        size_a,
        size_b,
        overlap_max=config.overlap_max,
    )
    corr, _, _ = correspondences(
        kept_a, kept_b, hom, size_a, size_b, config.overlap_max
    )
    samples, _ = pr_curve(descs_a, descs_b, corr)
    matches = match_descriptors(descs_a, descs_b, config.strategy, config.tau)
    return {
        "detected": [len(kps_a), len(kps_b)],
        "described": [len(kept_a), len(kept_b)],
        "correspondences": len(rs_pairs),
        "correct_matches": correct,
        "false_matches": false,
        "repeatability": rs,
        "matching_score": ms,
        "strategy_matches": len(matches.pairs),
        "no_visible": rs_flag or ms_flag,
        "pr_samples": [list(s) for s in samples],
    }


def cmd_match(args) -> int:
    config = _resolve_config(args)
    image_a = load_image(args.image_a)
    image_b = load_image(args.image_b)
    hom = load_homography(args.homography) if args.homography else np.eye(3)
    feat_a, feat_b = _features_many([image_a, image_b], config)
    body = _pair_report(
        feat_a,
        (image_a.width, image_a.height),
        feat_b,
        (image_b.width, image_b.height),
        hom,
        config,
    )
    os.makedirs(config.out, exist_ok=True)
    stem = f"{_stem(args.image_a)}_{_stem(args.image_b)}"
    pr_path = os.path.join(config.out, f"{stem}.pr.csv")
    pr_lines = ["recall,one_minus_precision"]
    pr_lines += [f"{r:.9g},{p:.9g}" for r, p in body["pr_samples"]]
    _write_text(pr_path, "\n".join(pr_lines) + "\n")
    report = {
        "command": "match",
        "image_a": args.image_a,
        "image_b": args.image_b,
        "homography": args.homography or "identity",
        "config": _config_dict(config),
        "pr_file": pr_path,
        **{k: v for k, v in body.items() if k != "pr_samples"},
    }
    json_path = os.path.join(config.out, f"{stem}.match.json")
    _write_json(json_path, report)
    print(
        f"RS {body['repeatability']:.9g}  MS {body['matching_score']:.9g} "
        f"-> {json_path}"
    )
    return 0


def _bench_oxford(path: str, config: RunConfig) -> tuple[dict, list[str]]:
    images, homs = read_oxford_sequence(path)
    feats = _features_many(images, config)
    sizes = [(image.width, image.height) for image in images]
    pairs = {}
    csv_lines = [
        "pair,repeatability,matching_score,correspondences,"
        "correct_matches,false_matches"
    ]
    for n in sorted(homs):
        body = _pair_report(
            feats[0], sizes[0], feats[n - 1], sizes[n - 1], homs[n], config
        )
        del body["pr_samples"]
        pairs[f"1-{n}"] = body
        csv_lines.append(
            f"1-{n},{body['repeatability']:.9g},{body['matching_score']:.9g},"
            f"{body['correspondences']},{body['correct_matches']},"
            f"{body['false_matches']}"
        )
    report = {"layout": "oxford", "pairs": pairs, "images": len(images)}
    return report, csv_lines


def _bench_copydays(path: str, config: RunConfig) -> tuple[dict, list[str]]:
    ref_dir = os.path.join(path, "original")
    if not os.path.isdir(ref_dir):
        raise FileNotFoundError(f"distortion layout needs {ref_dir}")
    levels = sorted(
        d
        for d in os.listdir(path)
        if os.path.isdir(os.path.join(path, d)) and d != "original"
    )
    names = sorted(
        f
        for f in os.listdir(ref_dir)
        if f.lower().endswith((".pgm", ".png", ".ppm"))
    )
    if not levels or not names:
        raise FileNotFoundError("distortion layout needs level dirs and images")

    def level_file(level: str, name: str) -> str:
        stem = os.path.splitext(name)[0]
        for alt in (name, stem + ".pgm", stem + ".png", stem + ".ppm"):
            candidate = os.path.join(path, level, alt)
            if os.path.exists(candidate):
                return candidate
        raise FileNotFoundError(f"missing {name} under level {level}")

    ref_images = [load_image(os.path.join(ref_dir, name)) for name in names]
    keys = [(level, name) for level in levels for name in names]
    level_images = [load_image(level_file(level, name)) for level, name in keys]
    all_feats = _features_many(ref_images + level_images, config)
    ref_feats = dict(zip(names, all_feats[: len(names)]))
    ref_sizes = {
        name: (image.width, image.height) for name, image in zip(names, ref_images)
    }
    identity = np.eye(3)
    ms_by_level = {level: {} for level in levels}
    for (level, name), image, feat in zip(
        keys, level_images, all_feats[len(names) :]
    ):
        ms, _, _, _ = matching_score(
            ref_feats[name][1],
            feat[1],
            ref_feats[name][2],
            feat[2],
            identity,
            ref_sizes[name],
            (image.width, image.height),
            overlap_max=config.overlap_max,
        )
        ms_by_level[level][name] = ms
    csv_lines = ["level,mean_matching_score"]
    for level in levels:
        values = [ms_by_level[level][name] for name in names]
        csv_lines.append(f"{level},{sum(values) / len(values):.9g}")
    report = {
        "layout": "distortion-sweep",
        "levels": levels,
        "images": names,
        "matching_score": ms_by_level,
    }
    return report, csv_lines


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    oxford = any(
        os.path.exists(os.path.join(args.directory, f"img1{ext}"))
        for ext in (".pgm", ".png", ".ppm")
    )
    if oxford:
        report, csv_lines = _bench_oxford(args.directory, config)
    else:
        report, csv_lines = _bench_copydays(args.directory, config)
    report["command"] = "bench"
    report["directory"] = args.directory
    report["config"] = _config_dict(config)
    os.makedirs(config.out, exist_ok=True)
    csv_path = os.path.join(config.out, "bench.csv")
    json_path = os.path.join(config.out, "bench.json")
    _write_text(csv_path, "\n".join(csv_lines) + "\n")
    _write_json(json_path, report)
    print(f"bench report -> {json_path}")
    return 0


def cmd_theory(args) -> int:
    config = _resolve_config(args)
    os.makedirs(config.out, exist_ok=True)
    size = args.size
    system = cached_system(size, size, config.j0 or None)
    curves = {}
    if args.kind == "sinusoid":
        for octave in range(args.alpha_octaves):
            period = args.base_period / 2.0**octave
            alpha = 2.0 * math.pi / period
            beta = alpha * args.beta_ratio
            spec = SyntheticSpec(
                kind="sinusoid2d",
                width=size,
                height=size,
                alpha=alpha,
                beta=beta,
            )
            curve = empirical_bmax(synth(spec), system)
            name = f"bmax_T{period:g}"
            _write_text(
                os.path.join(config.out, f"{name}.csv"), format_curve_csv(curve)
            )
            curves[name] = {
                "period": period,
                "alpha": alpha,
                "beta": beta,
                "argmax": curve.argmax,
                "peak": curve.peak,
                "argmax_closed_form": bmax_argmax(alpha),
            }
        peaks = [c["peak"] for c in curves.values()]
        spread = (max(peaks) - min(peaks)) / max(peaks) if peaks else 0.0
        report = {"kind": "sinusoid", "curves": curves, "peak_spread": spread}
    else:
        sigma = args.sigma
        ref_scales = [2.0 ** (k / 4.0) for k in range(2, 4 * (system.num_scales + 1))]
        for s in (sigma, sigma / 2.0):
            spec = SyntheticSpec(
                kind="gaussian2d", width=size, height=size, sigma_x=s, sigma_y=s
            )
            image = synth(spec)
            curve = empirical_bmax(image, system)
            ref = gaussian_scale_space_curve(image, ref_scales)
            _write_text(
                os.path.join(config.out, f"bmax_gaussian_s{s:g}.csv"),
                format_curve_csv(curve),
            )
            _write_text(
                os.path.join(config.out, f"laplacian_s{s:g}.csv"),
                format_curve_csv(ref),
            )
            curves[f"sigma{s:g}"] = {
                "sigma": s,
                "bmax_argmax": curve.argmax,
                "bmax_peak": curve.peak,
                "laplacian_argmax": ref.argmax,
                "laplacian_argmax_closed_form": laplacian_argmax(1.0 / s, 1.0 / s),
            }
        report = {"kind": "gaussian", "curves": curves}
    report["command"] = "theory"
    report["size"] = size
    report["num_scales"] = system.num_scales
    report["config"] = _config_dict(config)
    report["note"] = SQRT2_NOTE
    _write_json(os.path.join(config.out, "theory.json"), report)
    print(f"theory curves -> {config.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shearblob",
        description="Scale-invariant blob detection and description "
        "via the discrete shearlet transform.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--j0", type=int, help="number of scales (0 = auto)")
    common.add_argument("--threshold", type=float, help="detection threshold value")
    common.add_argument(
        "--edge-threshold", dest="edge_threshold", type=float,
        help="edge rejection threshold value",
    )
    common.add_argument("--c", type=int, help="common orientation count")
    common.add_argument("--tau", type=float, help="matching distance threshold")
    common.add_argument(
        "--overlap-max", dest="overlap_max", type=float,
        help="correspondence overlap error bound",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detect blobs in one image")
    p.add_argument("image")
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("describe", parents=[common], help="describe keypoints")
    p.add_argument("image")
    p.add_argument("--keypoints", help="keypoint file (default: detect first)")
    p.set_defaults(handler=cmd_describe)

    p = sub.add_parser("match", parents=[common], help="evaluate one image pair")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--homography", help="3x3 homography file (default identity)")
    p.set_defaults(handler=cmd_match)

    p = sub.add_parser("bench", parents=[common], help="run a sequence benchmark")
    p.add_argument("directory")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("theory", parents=[common], help="emit theory sweep curves")
    p.add_argument("--kind", choices=("sinusoid", "gaussian"), default="sinusoid")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--alpha-octaves", dest="alpha_octaves", type=int, default=4)
    p.add_argument("--base-period", dest="base_period", type=float, default=64.0)
    p.add_argument("--beta-ratio", dest="beta_ratio", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.set_defaults(handler=cmd_theory)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
