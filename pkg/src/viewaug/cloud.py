"""Colored point clouds lifted from posed RGB-D views.

A cloud is the geometry bridge between views: pixels with valid depth are
back-projected into world space, carrying their color, the view and pixel
they came from, and a per-point confidence. Clouds from single views are
filtered against segmentation and confidence maps, then merged, and the
result is re-rendered from synthesized viewpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraPose, Intrinsics
from .errors import ShapeMismatchError, ViewaugError


@dataclass(frozen=True)
class PointCloud:
    """World-space points with color, provenance, and confidence.

    positions:    (N, 3) float64, finite
    colors:       (N, 3) float64 in [0, 1]
    source_view:  (N,) int, index of the camera each point came from
    source_pixel: (N, 2) int, (u, v) pixel each point came from
    confidence:   (N,) float64 >= 0; +inf when no map was supplied, so an
                  unfiltered cloud survives any threshold
    """

    positions: np.ndarray
    colors: np.ndarray
    source_view: np.ndarray = None
    source_pixel: np.ndarray = None
    confidence: np.ndarray = None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        col = np.ascontiguousarray(self.colors, dtype=np.float64)
        n = len(pos)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ShapeMismatchError(f"positions must be (N, 3), got {pos.shape}")
        if col.shape != pos.shape:
            raise ShapeMismatchError(f"colors {col.shape} do not match positions {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ViewaugError("positions contain non-finite values")
        if col.size and (col.min() < 0.0 or col.max() > 1.0):
            raise ViewaugError("colors must lie in [0, 1]")
        view = (
            np.zeros(n, dtype=np.int64)
            if self.source_view is None
            else np.ascontiguousarray(self.source_view, dtype=np.int64)
        )
        pixel = (
            np.zeros((n, 2), dtype=np.int64)
            if self.source_pixel is None
            else np.ascontiguousarray(self.source_pixel, dtype=np.int64)
        )
        if view.shape != (n,):
            raise ShapeMismatchError(f"source_view must be ({n},), got {view.shape}")
        if pixel.shape != (n, 2):
            raise ShapeMismatchError(f"source_pixel must be ({n}, 2), got {pixel.shape}")
        if self.confidence is None:
            conf = np.full(n, np.inf)
        else:
            conf = np.ascontiguousarray(self.confidence, dtype=np.float64)
            if conf.shape != (n,):
                raise ShapeMismatchError(f"confidence must be ({n},), got {conf.shape}")
            if conf.size and conf.min() < 0.0:
                raise ViewaugError("confidence must be non-negative")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "source_view", view)
        object.__setattr__(self, "source_pixel", pixel)
        object.__setattr__(self, "confidence", conf)
        for arr in (self.positions, self.colors, self.source_view, self.source_pixel, self.confidence):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    def take(self, keep: np.ndarray, confidence: np.ndarray | None = None) -> "PointCloud":
        """Subset by boolean mask or index array, optionally with fresh
        per-point confidences (same length as self)."""
        conf = self.confidence if confidence is None else np.asarray(confidence, dtype=np.float64)
        return PointCloud(
            positions=self.positions[keep],
            colors=self.colors[keep],
            source_view=self.source_view[keep],
            source_pixel=self.source_pixel[keep],
            confidence=conf[keep],
        )


def lift(
    image: np.ndarray,
    depth: np.ndarray,
    intr: Intrinsics,
    pose: CameraPose,
    view_index: int = 0,
) -> PointCloud:
    """Back-project every pixel of a posed RGB-D view that has depth.

    Depth value 0 marks an invalid pixel (typically background in
    synthetic renders) and produces no point. Points come out in
    row-major pixel order, which keeps downstream tie-breaking
    deterministic.
    """
    image = np.asarray(image, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"image must be (H, W, 3), got {image.shape}")
    h, w = image.shape[:2]
    if depth.shape != (h, w):
        raise ShapeMismatchError(f"depth {depth.shape} does not match image {(h, w)}")
    if (h, w) != (intr.height, intr.width):
        raise ShapeMismatchError(
            f"image {(h, w)} does not match intrinsics {(intr.height, intr.width)}"
        )
    if not np.all(np.isfinite(depth)) or (depth.size and depth.min() < 0.0):
        raise ViewaugError("depth must be finite and non-negative (0 = invalid)")
    rows, cols = np.nonzero(depth > 0.0)
    z = depth[rows, cols]
    u = cols.astype(np.float64)
    v = rows.astype(np.float64)
    xc = (u - intr.cx) / intr.fx * z
    yc = (v - intr.cy) / intr.fy * z
    p_cam = np.stack([xc, yc, z], axis=1)
    positions = (p_cam - pose.t) @ pose.R
    return PointCloud(
        positions=positions,
        colors=image[rows, cols],
        source_view=np.full(len(rows), view_index, dtype=np.int64),
        source_pixel=np.stack([cols, rows], axis=1),
    )


def apply_mask_to_image(image: np.ndarray, mask: np.ndarray, background=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Replace pixels outside the mask with a flat background color."""
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"image must be (H, W, 3), got {image.shape}")
    if mask.shape != image.shape[:2]:
        raise ShapeMismatchError(f"mask {mask.shape} does not match image {image.shape[:2]}")
    out = image.copy()
    out[mask == 0] = np.asarray(background, dtype=np.float64)
    return out


def filter_cloud(
    cloud: PointCloud,
    seg_mask: np.ndarray | None = None,
    confidence_map: np.ndarray | None = None,
    threshold: float = 0.0,
) -> PointCloud:
    """Keep points on the segmented subject whose confidence beats `threshold`.

    Both maps are indexed at each point's source pixel. A missing mask
    keeps everything; a missing confidence map falls back to the cloud's
    stored per-point confidence (+inf for unscored clouds, so everything
    passes). The comparison is strict (> threshold), and the looked-up
    confidences are stored on the surviving points.
    """
    u = cloud.source_pixel[:, 0]
    v = cloud.source_pixel[:, 1]
    if confidence_map is not None:
        confidence_map = np.asarray(confidence_map, dtype=np.float64)
        _check_map_covers(confidence_map, u, v, "confidence map")
        conf = confidence_map[v, u]
    else:
        conf = cloud.confidence
    keep = conf > threshold
    if seg_mask is not None:
        seg_mask = np.asarray(seg_mask)
        _check_map_covers(seg_mask, u, v, "segmentation mask")
        keep &= seg_mask[v, u] != 0
    return cloud.take(keep, confidence=conf)


def _check_map_covers(grid: np.ndarray, u: np.ndarray, v: np.ndarray, what: str):
    if grid.ndim != 2:
        raise ShapeMismatchError(f"{what} must be 2-D, got shape {grid.shape}")
    if len(u) and (u.max() >= grid.shape[1] or v.max() >= grid.shape[0] or u.min() < 0 or v.min() < 0):
        raise ShapeMismatchError(f"{what} of shape {grid.shape} does not cover all source pixels")


def union(clouds: list[PointCloud]) -> PointCloud:
    """Concatenate clouds, preserving order and per-point provenance."""
    if not clouds:
        raise ViewaugError("union of zero clouds is undefined")
    return PointCloud(
        positions=np.concatenate([c.positions for c in clouds]),
        colors=np.concatenate([c.colors for c in clouds]),
        source_view=np.concatenate([c.source_view for c in clouds]),
        source_pixel=np.concatenate([c.source_pixel for c in clouds]),
        confidence=np.concatenate([c.confidence for c in clouds]),
    )
