"""Procedural test scene: a smoothly textured cube rendered analytically.

The cube sits at the origin with a trivariate sinusoidal albedo, so any
camera pose has an exact ground-truth image and depth map from one ray
cast per pixel. Because the albedo is smooth, sub-pixel reprojection
error translates into small color error, which makes the scene a sharp
end-to-end check for the lift/splat round trip without any stored
assets.

Writers serialize the scene in both on-disk layouts the loaders accept,
quantizing images to 8 bits and depth to 16 bits exactly as a real
capture would arrive.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .camera import CameraPose, Intrinsics, camera_center, intrinsics_from_fov, look_at
from .dataset import (
    SCENE_VERSION,
    Scene,
    pose_to_c2w_gl,
    save_image_png,
    save_mask_png,
    save_scaled_u16_png,
)

CUBE_HALF_EXTENT = 1.0


def surface_color(points: np.ndarray) -> np.ndarray:
    """Smooth albedo at world positions; shape (..., 3) -> (..., 3).

    Each channel is a low-frequency sinusoid of one coordinate, bounded
    inside (0.1, 0.9) so the texture never matches the white background.
    """
    points = np.asarray(points, dtype=np.float64)
    r = 0.5 + 0.4 * np.sin(2.1 * points[..., 0] + 0.3)
    g = 0.5 + 0.4 * np.sin(1.7 * points[..., 1] + 2.0)
    b = 0.5 + 0.4 * np.sin(2.5 * points[..., 2] + 4.0)
    return np.stack([r, g, b], axis=-1)


def _ray_box(origin: np.ndarray, directions: np.ndarray, half_extent: float) -> np.ndarray:
    """Entry distance of each ray into the centered axis-aligned box.

    Slab intersection; rays that miss (or start inside/past the box) get
    +inf. Zero direction components divide to +-inf, which the min/max
    reductions handle without branching.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = (-half_extent - origin) / directions
        hi = (half_extent - origin) / directions
    t_near = np.minimum(lo, hi).max(axis=-1)
    t_far = np.maximum(lo, hi).min(axis=-1)
    hit = (t_far >= t_near) & (t_near > 1e-9)
    return np.where(hit, t_near, np.inf)


def render_reference_view(
    intr: Intrinsics,
    pose: CameraPose,
    half_extent: float = CUBE_HALF_EXTENT,
    background=(1.0, 1.0, 1.0),
) -> tuple:
    """Exact (image, depth) of the cube from one camera.

    Depth is camera-frame z with 0 marking background, matching the
    convention the lift step expects.
    """
    cols, rows = np.meshgrid(np.arange(intr.width), np.arange(intr.height))
    d_cam = np.stack(
        [
            (cols - intr.cx) / intr.fx,
            (rows - intr.cy) / intr.fy,
            np.ones_like(cols, dtype=np.float64),
        ],
        axis=-1,
    )
    d_world = d_cam @ pose.R
    origin = camera_center(pose)
    # camera z of a hit equals the ray parameter because d_cam has unit z
    t = _ray_box(origin, d_world, half_extent)
    hit = np.isfinite(t)
    depth = np.where(hit, t, 0.0)
    image = np.broadcast_to(np.asarray(background, dtype=np.float64), d_cam.shape).copy()
    points = origin + t[hit, None] * d_world[hit]
    image[hit] = surface_color(points)
    return image, depth


def ring_camera_poses(
    count: int,
    orbit_radius: float = 5.5,
    elevation: float = math.radians(55.0),
    center=(0.0, 0.0, 0.0),
) -> list:
    """Cameras evenly spaced on a circle, all looking at `center`."""
    center = np.asarray(center, dtype=np.float64)
    poses = []
    for i in range(count):
        theta = 2.0 * math.pi * i / count
        offset = orbit_radius * np.array(
            [
                math.cos(elevation) * math.cos(theta),
                math.cos(elevation) * math.sin(theta),
                math.sin(elevation),
            ]
        )
        poses.append(look_at(center + offset, center))
    return poses


def cube_scene(
    n_views: int = 8,
    image_size: int = 64,
    orbit_radius: float = 5.5,
    elevation: float = math.radians(55.0),
    camera_angle_x: float = 0.8,
    with_masks: bool = False,
    with_confidence: bool = False,
) -> Scene:
    """An in-memory cube scene with exact analytic images and depths.

    The default ring is steep and distant enough that neighboring views
    overlap heavily, keeping disocclusion thin when warping between
    them. with_masks attaches the cube silhouette as a segmentation
    mask; with_confidence attaches a smooth synthetic confidence map
    (higher toward the image center) for exercising the point filter.
    """
    intr = intrinsics_from_fov(image_size, image_size, camera_angle_x)
    poses = ring_camera_poses(n_views, orbit_radius, elevation)
    images, depths, masks, confidences = [], [], [], []
    for pose in poses:
        image, depth = render_reference_view(intr, pose)
        images.append(image)
        depths.append(depth)
        if with_masks:
            masks.append(depth > 0.0)
        if with_confidence:
            cols, rows = np.meshgrid(np.arange(image_size), np.arange(image_size))
            ru = (cols - intr.cx) / image_size
            rv = (rows - intr.cy) / image_size
            confidences.append(2.0 - (ru * ru + rv * rv))
    depth_scale = orbit_radius + 2.0 * math.sqrt(3.0) * CUBE_HALF_EXTENT
    return Scene(
        images=images,
        poses=poses,
        intrinsics=intr,
        scene_center=np.zeros(3),
        depth_scale=depth_scale,
        depths=depths,
        seg_masks=masks or None,
        confidences=confidences or None,
    )


def write_blender_scene(scene: Scene, out_dir, split: str = "train") -> Path:
    """Serialize a scene in the transforms_<split>.json layout."""
    out_dir = Path(out_dir)
    frame_dir = out_dir / split
    frame_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    for i, (image, pose) in enumerate(zip(scene.images, scene.poses)):
        save_image_png(frame_dir / f"r_{i}.png", image)
        record = {
            "file_path": f"./{split}/r_{i}",
            "transform_matrix": pose_to_c2w_gl(pose).tolist(),
        }
        if scene.depths is not None:
            save_scaled_u16_png(frame_dir / f"r_{i}_depth.png", scene.depths[i], scene.depth_scale)
            record["depth_path"] = f"./{split}/r_{i}_depth.png"
        frames.append(record)
    fx = scene.intrinsics.fx
    meta = {
        "camera_angle_x": 2.0 * math.atan(0.5 * scene.intrinsics.width / fx),
        "depth_scale": scene.depth_scale,
        "scene_center": [float(x) for x in scene.scene_center],
        "frames": frames,
    }
    path = out_dir / f"transforms_{split}.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def write_real_scene(scene: Scene, out_dir, confidence_scale: float = 4.0) -> Path:
    """Serialize a scene in the scene.json layout with per-view rasters."""
    out_dir = Path(out_dir)
    for sub in ("images", "depths", "masks", "conf"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    frames = []
    for i, (image, pose) in enumerate(zip(scene.images, scene.poses)):
        record = {
            "image": f"images/{i:03d}.png",
            "w2c": [float(x) for x in pose.matrix().reshape(16)],
        }
        save_image_png(out_dir / record["image"], image)
        if scene.depths is not None:
            record["depth"] = f"depths/{i:03d}.png"
            save_scaled_u16_png(out_dir / record["depth"], scene.depths[i], scene.depth_scale)
        if scene.seg_masks is not None:
            record["seg_mask"] = f"masks/{i:03d}.png"
            save_mask_png(out_dir / record["seg_mask"], scene.seg_masks[i])
        if scene.confidences is not None:
            record["confidence"] = f"conf/{i:03d}.png"
            save_scaled_u16_png(out_dir / record["confidence"], scene.confidences[i], confidence_scale)
        frames.append(record)
    meta = {
        "version": SCENE_VERSION,
        "intrinsics": {
            "fx": scene.intrinsics.fx,
            "fy": scene.intrinsics.fy,
            "cx": scene.intrinsics.cx,
            "cy": scene.intrinsics.cy,
            "width": scene.intrinsics.width,
            "height": scene.intrinsics.height,
        },
        "depth_scale": scene.depth_scale,
        "confidence_scale": confidence_scale,
        "scene_center": [float(x) for x in scene.scene_center],
        "frames": frames,
    }
    path = out_dir / "scene.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
