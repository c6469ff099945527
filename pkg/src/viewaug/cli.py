"""Command-line front end.

    viewaug augment  --scene DIR --out DIR [--preset synthetic|real] ...
    viewaug metrics  --pred DIR --gt DIR [--lpips CSV] [--out FILE]
    viewaug validate --bundle DIR [--checksums FILE]
    viewaug preview  --scene DIR --source I --neighbor K --h H --out PNG

Exit codes: 0 success, 1 runtime failure, 2 bad arguments. Bad parameter
values (an inverted interpolation range, an unknown weight mode, an out
of range view index) count as bad arguments; missing or malformed input
data counts as a runtime failure.

Worker count resolves as: VIEWAUG_WORKERS environment variable if set,
else --workers, else one thread per CPU.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .cloud import filter_cloud, lift
from .dataset import (
    Scene,
    evenly_spaced,
    load_blender_scene,
    load_image_png,
    load_real_scene,
    read_manifest,
    save_image_png,
    save_mask_png,
    write_bundle,
)
from .errors import ViewaugError
from .metrics import MetricReport, avge, psnr, ssim
from .pipeline import augment_scene
from .posing import InterpolationGrid, interpolate_pose, sample_poses
from .splat import SplatConfig, render

WORKERS_ENV_VAR = "VIEWAUG_WORKERS"

USAGE_EXIT = 2
RUNTIME_EXIT = 1

DEFAULTS = {
    "views": None,
    "h_min": 0.025,
    "h_max": 0.975,
    "h_step": 0.025,
    "k": 16,
    "radius": 0.003,
    "weight_mode": "r2",
    "confidence": 0.0,
}

PRESETS = {
    "synthetic": {
        "views": 4,
        "h_min": 0.025,
        "h_max": 0.975,
        "h_step": 0.025,
        "k": 16,
        "radius": 0.003,
        "weight_mode": "r2",
        "confidence": 0.0,
    },
    "real": {
        "views": 8,
        "h_min": 0.1,
        "h_max": 0.1,
        "h_step": 0.025,
        "k": 16,
        "radius": 0.1,
        "weight_mode": "r2",
        "confidence": 0.0,
    },
}


@dataclass
class AugmentRun:
    """Everything one augmentation invocation depends on."""

    scene_dir: Path
    out_dir: Path
    n_views: int | None = None
    h_min: float = 0.025
    h_max: float = 0.975
    h_step: float = 0.025
    top_k: int = 16
    kernel_radius: float = 0.003
    weight_mode: str = "r2"
    confidence_threshold: float = 0.0
    seed: int = 0
    background: tuple = (1.0, 1.0, 1.0)
    workers: int | None = None

    def grid(self) -> InterpolationGrid:
        return InterpolationGrid(h_min=self.h_min, h_max=self.h_max, h_step=self.h_step)

    def splat_config(self) -> SplatConfig:
        return SplatConfig(
            kernel_radius=self.kernel_radius,
            top_k=self.top_k,
            weight_mode=self.weight_mode,
            background=self.background,
        )


class _UsageError(Exception):
    """Bad parameter values; maps to exit code 2."""


def _resolve_workers(flag_value: int | None) -> int | None:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise _UsageError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}") from exc
    return flag_value


def load_scene(scene_dir: Path, n_views: int | None = None) -> Scene:
    """Open either scene layout; subsample evenly when n_views is given."""
    scene_dir = Path(scene_dir)
    if (scene_dir / "scene.json").is_file():
        scene = load_real_scene(scene_dir)
        if n_views is None or n_views == len(scene):
            return scene
        keep = evenly_spaced(len(scene), n_views)
        return Scene(
            images=[scene.images[i] for i in keep],
            poses=[scene.poses[i] for i in keep],
            intrinsics=scene.intrinsics,
            scene_center=scene.scene_center,
            depth_scale=scene.depth_scale,
            depths=None if scene.depths is None else [scene.depths[i] for i in keep],
            seg_masks=None if scene.seg_masks is None else [scene.seg_masks[i] for i in keep],
            confidences=None
            if scene.confidences is None
            else [scene.confidences[i] for i in keep],
        )
    subsample = None
    if n_views is not None:
        meta = json.loads((scene_dir / "transforms_train.json").read_text())
        subsample = evenly_spaced(len(meta["frames"]), n_views)
    return load_blender_scene(scene_dir, "train", subsample)


def cmd_augment(run: AugmentRun) -> int:
    try:
        grid = run.grid()
        config = run.splat_config()
        workers = _resolve_workers(run.workers)
    except ViewaugError as exc:
        raise _UsageError(str(exc)) from exc

    scene = load_scene(run.scene_dir, run.n_views)
    views = augment_scene(
        scene,
        grid=grid,
        splat_config=config,
        threshold=run.confidence_threshold,
        workers=workers,
    )
    manifest = write_bundle(scene, views, run.out_dir, splat_config=config, grid=grid)
    # augment_scene preserves sampler order, so samples align with views
    samples = sample_poses(scene.poses, scene.scene_center, grid)
    for i, (sample, view) in enumerate(zip(samples, views)):
        coverage = 100.0 * view.mask.mean()
        inside = view.weights[view.mask]
        mean_w = float(inside.mean()) if inside.size else 0.0
        print(
            f"generated {i:03d}: source {sample.source_index} -> {sample.neighbor_index} "
            f"h={view.h:.3f} mask {coverage:5.1f}% mean weight {mean_w:.3f}"
        )
    print(f"wrote {len(scene)} original + {len(views)} generated frames -> {manifest}")
    return 0


def _matched_names(pred_dir: Path, gt_dir: Path):
    pred_names = {p.name for p in Path(pred_dir).glob("*.png")}
    gt_names = {p.name for p in Path(gt_dir).glob("*.png")}
    return sorted(pred_names & gt_names), sorted(pred_names ^ gt_names)


def _read_lpips_sidecar(path: Path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["filename", "lpips"]:
            raise ViewaugError(f"{path} must start with header 'filename,lpips', got {header}")
        return {row[0]: float(row[1]) for row in reader if row}


def _fmt(x) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "inf"
    return f"{x:.4f}"


def cmd_metrics(pred_dir: Path, gt_dir: Path, sidecar: Path | None, out_path: Path | None) -> int:
    matched, unmatched = _matched_names(pred_dir, gt_dir)
    if unmatched:
        for name in unmatched:
            where = "pred" if (Path(pred_dir) / name).is_file() else "gt"
            print(f"unmatched file ({where} only): {name}", file=sys.stderr)
        return RUNTIME_EXIT
    if not matched:
        print("no matching .png files", file=sys.stderr)
        return RUNTIME_EXIT
    lpips_by_name = _read_lpips_sidecar(sidecar) if sidecar else None

    rows = []
    for name in matched:
        pred = load_image_png(Path(pred_dir) / name)
        gt = load_image_png(Path(gt_dir) / name)
        p = psnr(pred, gt)
        s = ssim(pred, gt)
        if lpips_by_name is None:
            rows.append((name, MetricReport(psnr=p, ssim=s)))
        else:
            if name not in lpips_by_name:
                print(f"sidecar has no entry for {name}", file=sys.stderr)
                return RUNTIME_EXIT
            lp = lpips_by_name[name]
            rows.append((name, MetricReport(psnr=p, ssim=s, lpips=lp, avge=avge(p, s, lp))))

    summary = {
        "psnr": float(np.mean([r.psnr for _, r in rows])),
        "ssim": float(np.mean([r.ssim for _, r in rows])),
    }
    if lpips_by_name is not None:
        summary["lpips"] = float(np.mean([r.lpips for _, r in rows]))
        summary["avge"] = float(np.mean([r.avge for _, r in rows]))

    header = ["image", "psnr", "ssim"] + (["lpips", "avge"] if lpips_by_name else [])
    print("  ".join(f"{h:>12s}" for h in header))
    for name, r in rows:
        cells = [name, _fmt(r.psnr), _fmt(r.ssim)]
        if lpips_by_name:
            cells += [_fmt(r.lpips), _fmt(r.avge)]
        print("  ".join(f"{c:>12s}" for c in cells))
    print("  ".join(f"{c:>12s}" for c in ["mean"] + [_fmt(summary[k]) for k in header[1:]]))

    if out_path is not None:
        report = {
            "images": {
                name: {
                    key: value
                    for key, value in (
                        ("psnr", r.psnr),
                        ("ssim", r.ssim),
                        ("lpips", r.lpips),
                        ("avge", r.avge),
                    )
                    if value is not None
                }
                for name, r in rows
            },
            "mean": summary,
        }
        Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(f"report -> {out_path}")
    return 0


def _decode_checksum(path: Path) -> str:
    """sha256 of the decoded raster, so the hash is codec-independent."""
    with Image.open(path) as img:
        if img.mode == "I;16":
            data = np.asarray(img, dtype=np.uint16)
        elif img.mode == "L":
            data = np.asarray(img, dtype=np.uint8)
        else:
            data = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()


def cmd_validate(bundle_dir: Path, checksums_path: Path | None) -> int:
    bundle_dir = Path(bundle_dir)
    violations = []

    def check(frame_id, condition, message):
        if not condition:
            violations.append(f"frame {frame_id}: {message}")

    try:
        manifest = read_manifest(bundle_dir)
    except ViewaugError as exc:
        print(f"invalid bundle: {exc}", file=sys.stderr)
        return RUNTIME_EXIT

    checksums = {}
    for i, record in enumerate(manifest["frames"]):
        kind = record.get("kind")
        frame_id = f"{i} ({kind})"
        if kind not in ("original", "generated"):
            violations.append(f"frame {i}: unknown kind {kind!r}")
            continue
        needed = ["image", "pose", "loss"]
        if kind == "generated":
            needed += ["mask", "weights", "foreground", "source_index", "h"]
        missing = [key for key in needed if key not in record]
        if missing:
            violations.append(f"frame {frame_id}: missing keys {missing}")
            continue
        pose = np.asarray(record["pose"], dtype=np.float64)
        check(frame_id, pose.shape == (16,), f"pose holds {pose.size} numbers, wanted 16")
        expected_loss = "gs_loss" if kind == "original" else "masked_weighted_l1"
        check(frame_id, record["loss"] == expected_loss,
              f"loss is {record['loss']!r}, wanted {expected_loss!r}")

        file_keys = ["image"] if kind == "original" else ["image", "mask", "weights", "foreground"]
        paths = {}
        ok = True
        for key in file_keys:
            path = bundle_dir / record[key]
            if not path.is_file():
                violations.append(f"frame {frame_id}: referenced file {path} not found")
                ok = False
            else:
                paths[key] = path
        if not ok:
            continue

        checksums[str(i)] = {key: _decode_checksum(path) for key, path in paths.items()}

        if kind == "generated":
            with Image.open(paths["mask"]) as img:
                mask_raw = np.asarray(img.convert("L"))
            with Image.open(paths["foreground"]) as img:
                fg_raw = np.asarray(img.convert("L"))
            with Image.open(paths["weights"]) as img:
                weights_raw = np.asarray(img)
            check(frame_id, bool(np.isin(mask_raw, (0, 255)).all()),
                  "mask holds values other than 0 and 255")
            check(frame_id, bool(np.isin(fg_raw, (0, 255)).all()),
                  "foreground holds values other than 0 and 255")
            check(frame_id, weights_raw.dtype == np.uint16,
                  f"weights decode as {weights_raw.dtype}, wanted 16-bit")
            fg = fg_raw != 0
            # stored weights are min-max normalized, which preserves the
            # zero set only when the raw map had a zero; all-covered and
            # all-empty frames renormalize degenerately, so the coverage
            # consistency check applies to mixed frames only
            if weights_raw.dtype == np.uint16 and fg.any() and not fg.all():
                check(frame_id, bool(np.array_equal(fg, weights_raw > 0)),
                      "foreground mask disagrees with positive weights")

    for line in violations:
        print(line, file=sys.stderr)
    if violations:
        return RUNTIME_EXIT
    if checksums_path is not None:
        Path(checksums_path).write_text(json.dumps(checksums, indent=2, sort_keys=True) + "\n")
        print(f"checksums -> {checksums_path}")
    print(f"bundle ok: {len(manifest['frames'])} frames")
    return 0


def cmd_preview(scene_dir: Path, source: int, neighbor: int, h: float,
                out_path: Path, config: SplatConfig, threshold: float) -> int:
    if not (0.0 <= h <= 1.0):
        raise _UsageError(f"h must be in [0, 1], got {h}")
    scene = load_scene(scene_dir)
    n = len(scene)
    if not (0 <= source < n and 0 <= neighbor < n) or source == neighbor:
        raise _UsageError(f"need two distinct view indices below {n}, got {source} and {neighbor}")
    if scene.depths is None:
        print("scene has no depth maps", file=sys.stderr)
        return RUNTIME_EXIT
    pose = interpolate_pose(scene.poses[source], scene.poses[neighbor], h, scene.scene_center)
    cloud = lift(scene.images[source], scene.depths[source], scene.intrinsics,
                 scene.poses[source], view_index=source)
    seg = scene.seg_masks[source] if scene.seg_masks is not None else None
    conf = scene.confidences[source] if scene.confidences is not None else None
    cloud = filter_cloud(cloud, seg_mask=seg, confidence_map=conf, threshold=threshold)
    out = render(cloud, scene.intrinsics, pose, config)
    out_path = Path(out_path)
    mask_path = out_path.with_name(out_path.stem + "_mask" + (out_path.suffix or ".png"))
    save_image_png(out_path, out.rgb)
    save_mask_png(mask_path, out.foreground)
    print(f"preview -> {out_path} and {mask_path}")
    return 0


def _parse_background(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("background must be R,G,B with channels in [0, 1]")
    return tuple(float(p) for p in parts)


def _add_splat_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=int, default=None,
                        help="points composited per pixel")
    parser.add_argument("--radius", type=float, default=None,
                        help="splat kernel radius in screen units")
    parser.add_argument("--weight-mode", default=None, choices=["r2", "linear"],
                        help="splat falloff")
    parser.add_argument("--confidence", type=float, default=None,
                        help="minimum point confidence (strict)")
    parser.add_argument("--background", type=_parse_background, default=(1.0, 1.0, 1.0),
                        metavar="R,G,B", help="composite background color")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewaug",
        description="Synthesize posed training views from sparse RGB-D input.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="sample poses and write an export bundle")
    p_aug.add_argument("--scene", type=Path, required=True)
    p_aug.add_argument("--out", type=Path, required=True)
    p_aug.add_argument("--preset", choices=sorted(PRESETS), default=None,
                       help="parameter family for a scene type; explicit flags win")
    p_aug.add_argument("--views", type=int, default=None, help="subsample to this many views")
    p_aug.add_argument("--h-min", type=float, default=None)
    p_aug.add_argument("--h-max", type=float, default=None)
    p_aug.add_argument("--h-step", type=float, default=None)
    _add_splat_flags(p_aug)
    p_aug.add_argument("--workers", type=int, default=None,
                       help=f"render threads (default: CPU count; {WORKERS_ENV_VAR} overrides)")
    p_aug.add_argument("--seed", type=int, default=0,
                       help="seed for randomized selection, if any is configured")

    p_met = sub.add_parser("metrics", help="score predicted images against ground truth")
    p_met.add_argument("--pred", type=Path, required=True)
    p_met.add_argument("--gt", type=Path, required=True)
    p_met.add_argument("--lpips", type=Path, default=None,
                       help="CSV sidecar (filename,lpips) enabling the perceptual columns")
    p_met.add_argument("--out", type=Path, default=None, help="write a JSON report here")

    p_val = sub.add_parser("validate", help="check a bundle directory")
    p_val.add_argument("--bundle", type=Path, required=True)
    p_val.add_argument("--checksums", type=Path, default=None,
                       help="write per-frame sha256 of decoded rasters here")

    p_pre = sub.add_parser("preview", help="render one interpolated view")
    p_pre.add_argument("--scene", type=Path, required=True)
    p_pre.add_argument("--source", type=int, required=True)
    p_pre.add_argument("--neighbor", type=int, required=True)
    p_pre.add_argument("--h", type=float, required=True)
    p_pre.add_argument("--out", type=Path, required=True)
    _add_splat_flags(p_pre)
    return parser


def _merged(args, key: str):
    """Flag if given, else preset value, else the global default."""
    flag_value = getattr(args, key)
    if flag_value is not None:
        return flag_value
    if getattr(args, "preset", None):
        return PRESETS[args.preset][key]
    return DEFAULTS[key]


def _run_from_args(args) -> int:
    if args.command == "augment":
        run = AugmentRun(
            scene_dir=args.scene,
            out_dir=args.out,
            n_views=_merged(args, "views"),
            h_min=_merged(args, "h_min"),
            h_max=_merged(args, "h_max"),
            h_step=_merged(args, "h_step"),
            top_k=_merged(args, "k"),
            kernel_radius=_merged(args, "radius"),
            weight_mode=_merged(args, "weight_mode"),
            confidence_threshold=_merged(args, "confidence"),
            seed=args.seed,
            background=args.background,
            workers=args.workers,
        )
        return cmd_augment(run)
    if args.command == "metrics":
        return cmd_metrics(args.pred, args.gt, args.lpips, args.out)
    if args.command == "validate":
        return cmd_validate(args.bundle, args.checksums)
    if args.command == "preview":
        try:
            config = SplatConfig(
                kernel_radius=args.radius if args.radius is not None else DEFAULTS["radius"],
                top_k=args.k if args.k is not None else DEFAULTS["k"],
                weight_mode=args.weight_mode if args.weight_mode is not None else DEFAULTS["weight_mode"],
                background=args.background,
            )
        except ViewaugError as exc:
            raise _UsageError(str(exc)) from exc
        threshold = args.confidence if args.confidence is not None else DEFAULTS["confidence"]
        return cmd_preview(args.scene, args.source, args.neighbor, args.h,
                           args.out, config, threshold)
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run_from_args(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ViewaugError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
