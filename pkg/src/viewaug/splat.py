"""Soft point splatting: render a colored point cloud from a pinhole view.

Every point covers a small disk of pixels. Pixel centers inside the disk
receive a weight from a radial falloff; per pixel, the nearest-K covering
points (by camera depth, ties by point index) are alpha-composited front
to back over a flat background.

Distances are measured in a resolution-independent screen unit: the larger
image dimension spans 2 units, so a kernel radius transfers across image
sizes. Weight falloffs:

  "r2":     w = 1 - dist / radius**2, clamped to [0, 1]
  "linear": w = 1 - dist / radius

and in both modes any pixel farther than `radius` gets weight 0. With the
"r2" falloff and radius < 1 the clamp makes the effective footprint much
tighter than the radius gate; that is intentional, it gives near-hard
splats whose weight still ramps over the last stretch.

The vectorized renderer here and any scalar re-implementation agree bit
for bit as long as both build on `splat_weight` and the projection in
`camera`, because every arithmetic step keeps the same operand order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraPose, Intrinsics, project_points
from .cloud import PointCloud
from .errors import ViewaugError

WEIGHT_MODES = ("r2", "linear")

# survivors kept in memory before an intermediate top-K prune
_PRUNE_BUDGET = 2_000_000
# candidate (point, pixel) pairs examined per vectorized chunk
_CHUNK_PAIRS = 4_000_000


@dataclass(frozen=True)
class SplatConfig:
    """Rendering knobs for the point splatter.

    kernel_radius is in screen units (larger image dimension = 2 units).
    top_k bounds how many points may contribute to one pixel.
    """

    kernel_radius: float = 0.003
    top_k: int = 16
    weight_mode: str = "r2"
    background: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not (self.kernel_radius > 0.0 and math.isfinite(self.kernel_radius)):
            raise ViewaugError(f"kernel_radius must be positive, got {self.kernel_radius}")
        if self.top_k < 1:
            raise ViewaugError(f"top_k must be >= 1, got {self.top_k}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ViewaugError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        bg = tuple(float(c) for c in self.background)
        if len(bg) != 3 or any(not (0.0 <= c <= 1.0) for c in bg):
            raise ViewaugError(f"background must be 3 channels in [0, 1], got {self.background!r}")
        object.__setattr__(self, "background", bg)


@dataclass(frozen=True)
class RenderOutput:
    """rgb image, per-pixel sum of contributing weights, coverage mask.

    zmin holds the camera depth of the nearest retained point per pixel
    (+inf where nothing splats); diagnostic, the compositing never reads it.
    """

    rgb: np.ndarray
    weight_sum: np.ndarray
    foreground: np.ndarray
    zmin: np.ndarray


def ndc_scale(width: int, height: int) -> float:
    """Pixels-to-screen-units factor; the larger dimension spans 2 units."""
    return 2.0 / max(width, height)


def splat_weight(dist: float, radius: float, mode: str) -> float:
    """Scalar falloff weight for a pixel at screen-space distance `dist`.

    This is the arithmetic ground truth the vectorized renderer mirrors;
    change one and you must change both.
    """
    if dist > radius:
        return 0.0
    if mode == "r2":
        rr = radius * radius
        w = 1.0 - dist / rr
    elif mode == "linear":
        w = 1.0 - dist / radius
    else:
        raise ViewaugError(f"weight_mode must be one of {WEIGHT_MODES}, got {mode!r}")
    if w < 0.0:
        return 0.0
    if w > 1.0:
        return 1.0
    return w


def _splat_weights(dist: np.ndarray, radius: float, mode: str) -> np.ndarray:
    # elementwise twin of splat_weight, same operand order
    if mode == "r2":
        rr = radius * radius
        w = 1.0 - dist / rr
    else:
        w = 1.0 - dist / radius
    w = np.clip(w, 0.0, 1.0)
    return np.where(dist > radius, 0.0, w)


def _ranks_in_sorted_groups(keys: np.ndarray) -> np.ndarray:
    """Position of each element within its run of equal keys (keys sorted)."""
    n = len(keys)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.empty(n, dtype=bool)
    starts[0] = True
    np.not_equal(keys[1:], keys[:-1], out=starts[1:])
    first = np.nonzero(starts)[0]
    gid = np.cumsum(starts) - 1
    return np.arange(n, dtype=np.int64) - first[gid]


def _prune_top_k(pix, z, idx, w, k):
    """Keep the k nearest candidates per pixel, order by (pixel, depth, index).

    Safe to apply to partial candidate sets and again to their union: a
    candidate outside the nearest k of a subset can never enter the
    nearest k of the whole.
    """
    order = np.lexsort((idx, z, pix))
    pix, z, idx, w = pix[order], z[order], idx[order], w[order]
    keep = _ranks_in_sorted_groups(pix) < k
    return pix[keep], z[keep], idx[keep], w[keep]


def _gather_candidates(cloud: PointCloud, intr: Intrinsics, pose: CameraPose, config: SplatConfig):
    """All (pixel, depth, point, weight) tuples with positive weight.

    Candidates come from a per-point bounding box one pixel wider than the
    radius on every side, so borderline pixels are always examined; the
    exact weight computation then decides membership. Returned arrays are
    top-k pruned and sorted by (pixel, depth, point index).
    """
    width, height = intr.width, intr.height
    radius = config.kernel_radius
    scale = ndc_scale(width, height)
    r_px = radius / scale

    u, v, z, valid = project_points(cloud.positions, intr, pose)
    near = (
        valid
        & (u + r_px >= -1.0)
        & (u - r_px <= width)
        & (v + r_px >= -1.0)
        & (v - r_px <= height)
    )
    sel = np.nonzero(near)[0]

    empty = (
        np.zeros(0, dtype=np.int64),
        np.zeros(0),
        np.zeros(0, dtype=np.int64),
        np.zeros(0),
    )
    if len(sel) == 0:
        return empty

    span = int(math.floor(2.0 * r_px)) + 3
    per_chunk = max(1, _CHUNK_PAIRS // (span * span))
    offs = np.arange(span, dtype=np.int64)

    parts = [empty]
    kept = 0
    for lo in range(0, len(sel), per_chunk):
        pts = sel[lo : lo + per_chunk]
        cu, cv, cz = u[pts], v[pts], z[pts]
        base_c = np.ceil(cu - r_px).astype(np.int64) - 1
        base_r = np.ceil(cv - r_px).astype(np.int64) - 1
        cols = base_c[:, None] + offs[None, :]
        rows = base_r[:, None] + offs[None, :]
        inside = ((rows >= 0) & (rows < height))[:, :, None] & ((cols >= 0) & (cols < width))[:, None, :]

        du = (cols.astype(np.float64) - cu[:, None])[:, None, :]
        dv = (rows.astype(np.float64) - cv[:, None])[:, :, None]
        dist = np.sqrt(du * du + dv * dv) * scale
        w = _splat_weights(dist, radius, config.weight_mode)
        hit = inside & (w > 0.0)

        n = len(pts)
        pix = rows[:, :, None] * width + cols[:, None, :]
        pidx = np.broadcast_to(pts[:, None, None], (n, span, span))
        pz = np.broadcast_to(cz[:, None, None], (n, span, span))
        parts.append((pix[hit], pz[hit], pidx[hit], w[hit]))
        kept += len(parts[-1][0])
        if kept > _PRUNE_BUDGET:
            merged = tuple(np.concatenate(arrs) for arrs in zip(*parts))
            merged = _prune_top_k(*merged, config.top_k)
            parts = [merged]
            kept = len(merged[0])

    merged = tuple(np.concatenate(arrs) for arrs in zip(*parts))
    return _prune_top_k(*merged, config.top_k)


def render(cloud: PointCloud, intr: Intrinsics, pose: CameraPose, config: SplatConfig | None = None) -> RenderOutput:
    """Splat a point cloud into an image from the given camera.

    Per pixel, at most `top_k` covering points composite front to back:

        rgb = sum_k  c_k w_k prod_{j<k} (1 - w_j)  +  bg prod_k (1 - w_k)

    weight_sum is the plain sum of the kept weights and foreground marks
    pixels covered by at least one point; foreground == (weight_sum > 0)
    always holds because candidates with zero weight are never kept.
    """
    if config is None:
        config = SplatConfig()
    height, width = intr.height, intr.width
    pix, z, idx, w = _gather_candidates(cloud, intr, pose, config)

    rgb = np.zeros((height * width, 3))
    transmittance = np.ones(height * width)
    weight_sum = np.zeros(height * width)
    foreground = np.zeros(height * width, dtype=bool)
    zmin = np.full(height * width, np.inf)

    rank = _ranks_in_sorted_groups(pix)
    colors = cloud.colors
    for k in range(int(rank.max()) + 1 if len(rank) else 0):
        at = rank == k
        p = pix[at]
        ww = w[at]
        wt = ww * transmittance[p]
        rgb[p] = rgb[p] + colors[idx[at]] * wt[:, None]
        transmittance[p] = transmittance[p] * (1.0 - ww)
        weight_sum[p] = weight_sum[p] + ww
        foreground[p] = True
        if k == 0:
            zmin[p] = z[at]

    bg = np.asarray(config.background)
    rgb = rgb + bg[None, :] * transmittance[:, None]
    return RenderOutput(
        rgb=rgb.reshape(height, width, 3),
        weight_sum=weight_sum.reshape(height, width),
        foreground=foreground.reshape(height, width),
        zmin=zmin.reshape(height, width),
    )


def render_mask_only(cloud: PointCloud, intr: Intrinsics, pose: CameraPose, config: SplatConfig | None = None) -> np.ndarray:
    """Coverage mask only: which pixels would any point splat onto.

    Independent of top_k, so pruning to the single nearest candidate is
    enough and keeps memory small.
    """
    if config is None:
        config = SplatConfig()
    tight = SplatConfig(
        kernel_radius=config.kernel_radius,
        top_k=1,
        weight_mode=config.weight_mode,
        background=config.background,
    )
    pix, _, _, _ = _gather_candidates(cloud, intr, pose, tight)
    foreground = np.zeros(intr.height * intr.width, dtype=bool)
    foreground[pix] = True
    return foreground.reshape(intr.height, intr.width)
