"""End-to-end augmentation: posed RGB-D views in, synthesized views out.

Each input view lifts to its own point cloud (filtered by segmentation
and confidence when available). New camera poses are sampled along arcs
between neighboring views; for every sampled pose the source view's
cloud is splatted to produce the image, and the union cloud of all views
is splatted for coverage only. Agreement between the two coverage masks
plus the normalized splat weights make the supervision mask and weight
map that accompany each synthesized image.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cloud import PointCloud, filter_cloud, lift, union
from .dataset import Scene
from .errors import InsufficientViewsError, ViewaugError
from .posing import InterpolationGrid, sample_poses
from .splat import SplatConfig, render, render_mask_only
from .visibility import GeneratedView, build_generated_view


def lift_scene_clouds(scene: Scene, threshold: float = 0.0) -> list:
    """One filtered point cloud per view, indexed like the scene."""
    if scene.depths is None:
        raise ViewaugError("scene has no depth maps; cannot lift point clouds")
    clouds = []
    for i in range(len(scene)):
        cloud = lift(scene.images[i], scene.depths[i], scene.intrinsics, scene.poses[i], view_index=i)
        seg = scene.seg_masks[i] if scene.seg_masks is not None else None
        conf = scene.confidences[i] if scene.confidences is not None else None
        clouds.append(filter_cloud(cloud, seg_mask=seg, confidence_map=conf, threshold=threshold))
    return clouds


def synthesize_view(
    sample,
    clouds: list,
    full_cloud: PointCloud,
    scene: Scene,
    config: SplatConfig,
) -> GeneratedView:
    """Render one sampled pose from its source view's cloud."""
    partial = render(clouds[sample.source_index], scene.intrinsics, sample.pose, config)
    union_fg = render_mask_only(full_cloud, scene.intrinsics, sample.pose, config)
    return build_generated_view(partial, union_fg, sample.pose, sample.source_index, sample.h)


def augment_scene(
    scene: Scene,
    grid: InterpolationGrid | None = None,
    splat_config: SplatConfig | None = None,
    threshold: float = 0.0,
    workers: int | None = None,
) -> list:
    """Synthesize views for every sampled pose, in sampler order.

    Rendering is bitwise deterministic and the worker pool only
    parallelizes independent poses, so the result is identical for any
    worker count.
    """
    if len(scene) < 3:
        raise InsufficientViewsError(f"augmentation needs at least 3 views, scene has {len(scene)}")
    if splat_config is None:
        splat_config = SplatConfig()

    clouds = lift_scene_clouds(scene, threshold)
    full_cloud = union(clouds)
    samples = sample_poses(scene.poses, scene.scene_center, grid)

    def run(sample):
        return synthesize_view(sample, clouds, full_cloud, scene, splat_config)

    if workers is not None and workers <= 1:
        return [run(s) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, samples))
