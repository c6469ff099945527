#!/usr/bin/env python3
"""Generate a synthetic cube scene on disk for experiments.

    python3 scripts/make_synthetic_scene.py out_dir --views 8 --size 64 --format blender
    python3 scripts/make_synthetic_scene.py out_dir --format real --masks --confidence

The blender layout is the transforms_train.json convention; the real
layout is scene.json with per-frame depth (and optionally segmentation
masks and confidence maps). Both load back through viewaug and feed
straight into `viewaug augment`.
"""

import argparse
import math
from pathlib import Path

from viewaug.synthetic import cube_scene, write_blender_scene, write_real_scene


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=Path)
    parser.add_argument("--views", type=int, default=8)
    parser.add_argument("--size", type=int, default=64, help="image side in pixels")
    parser.add_argument("--format", choices=["blender", "real"], default="blender")
    parser.add_argument("--orbit", type=float, default=5.5, help="camera distance")
    parser.add_argument("--elevation", type=float, default=55.0, help="degrees above the plane")
    parser.add_argument("--masks", action="store_true",
                        help="attach the silhouette as a segmentation mask (real format)")
    parser.add_argument("--confidence", action="store_true",
                        help="attach a synthetic confidence map (real format)")
    args = parser.parse_args()

    scene = cube_scene(
        n_views=args.views,
        image_size=args.size,
        orbit_radius=args.orbit,
        elevation=math.radians(args.elevation),
        with_masks=args.masks,
        with_confidence=args.confidence,
    )
    if args.format == "blender":
        if args.masks or args.confidence:
            parser.error("masks and confidence maps only exist in the real format")
        path = write_blender_scene(scene, args.out)
    else:
        path = write_real_scene(scene, args.out)
    print(f"{args.views} views at {args.size}x{args.size} -> {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
