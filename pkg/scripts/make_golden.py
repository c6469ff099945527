#!/usr/bin/env python3
"""Build the cross-package fixture kit a downstream trainer adapter tests against.

    python3 scripts/make_golden.py out_dir [--views 4] [--size 48] [--seed 0]

Produces under out_dir:
    scene/          synthetic input scene (blender layout)
    bundle/         the synthetic-preset export bundle (views + 156 generated)
    checksums.json  per-frame sha256 of decoded rasters, from `viewaug validate`
    renders/        deterministic stand-ins for trainer-rendered images
    golden.json     expected loss (and gradient magnitude) per render

Everything downstream of the bundle is computed from DECODED pixel data,
so any consumer that reads the same PNGs reproduces the numbers exactly;
golden.json carries the loss configuration it was computed with.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from viewaug.cli import main as cli_main
from viewaug.dataset import (
    load_image_png,
    load_mask_png,
    load_scaled_u16_png,
    read_manifest,
    save_image_png,
)
from viewaug.metrics import (
    LossConfig,
    gs_loss,
    gs_loss_grad,
    masked_weighted_l1,
    masked_weighted_l1_grad,
)
from viewaug.synthetic import cube_scene, write_blender_scene


def trainer_render_stand_in(target: np.ndarray, rng) -> np.ndarray:
    """A plausible mid-training render: the target, blurred by noise."""
    return np.clip(target + rng.normal(0.0, 0.03, size=target.shape), 0.0, 1.0)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=Path)
    parser.add_argument("--views", type=int, default=4)
    parser.add_argument("--size", type=int, default=48)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--generated-cases", type=int, default=12,
                        help="how many generated frames get a golden loss")
    args = parser.parse_args()

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_blender_scene(cube_scene(n_views=args.views, image_size=args.size), out / "scene")
    # the preset supplies the view count and interpolation grid; the wider
    # linear kernel replaces the default sub-pixel footprint so the fixture
    # frames carry real coverage, mixed masks, and non-trivial weights
    code = cli_main(["augment", "--scene", str(out / "scene"),
                     "--out", str(out / "bundle"), "--preset", "synthetic",
                     "--views", str(args.views),
                     "--radius", "0.05", "--weight-mode", "linear"])
    if code != 0:
        return code
    code = cli_main(["validate", "--bundle", str(out / "bundle"),
                     "--checksums", str(out / "checksums.json")])
    if code != 0:
        return code

    manifest = read_manifest(out / "bundle")
    frames = manifest["frames"]
    original_ids = [i for i, f in enumerate(frames) if f["kind"] == "original"]
    generated_ids = [i for i, f in enumerate(frames) if f["kind"] == "generated"]
    step = max(1, len(generated_ids) // args.generated_cases)
    picked = original_ids + generated_ids[::step][: args.generated_cases]

    renders_dir = out / "renders"
    renders_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(args.seed)
    config = LossConfig()
    cases = []
    for i in picked:
        record = frames[i]
        target = load_image_png(out / "bundle" / record["image"])
        name = f"frame_{i:03d}.png"
        save_image_png(renders_dir / name, trainer_render_stand_in(target, rng))
        rendered = load_image_png(renders_dir / name)  # decoded, like a consumer sees it
        if record["kind"] == "original":
            loss = gs_loss(rendered, target, config)
            grad = gs_loss_grad(rendered, target, config)
        else:
            mask = load_mask_png(out / "bundle" / record["mask"])
            weights = load_scaled_u16_png(out / "bundle" / record["weights"], 1.0)
            loss = masked_weighted_l1(rendered, target, mask, weights)
            grad = masked_weighted_l1_grad(rendered, target, mask, weights)
        cases.append(
            {
                "frame": i,
                "kind": record["kind"],
                "loss_name": record["loss"],
                "rendered": f"renders/{name}",
                "loss": float(loss),
                "grad_abs_sum": float(np.abs(grad).sum()),
            }
        )

    golden = {
        "loss_config": {
            "ssim_weight": config.ssim_weight,
            "window_size": config.window_size,
            "sigma": config.sigma,
            "data_range": config.data_range,
        },
        "cases": cases,
    }
    (out / "golden.json").write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(f"golden kit: {len(frames)} bundle frames, {len(cases)} loss cases -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
