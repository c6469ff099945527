"""Camera pose interpolation along arcs between nearby training views.

New viewpoints are synthesized between pairs of neighbouring cameras that
orbit a common scene center: rotations travel the shortest great-circle
path between the endpoint orientations, and camera positions swing around
the scene center rather than cutting straight through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import (
    CameraPose,
    UnitQuaternion,
    camera_center,
    pose_to_quaternion,
    quaternion_to_rotation,
)
from .errors import (
    DegenerateGeometryError,
    InsufficientViewsError,
    ShapeMismatchError,
    ViewaugError,
)

SMALL_ANGLE = 1e-6


@dataclass(frozen=True)
class InterpolationGrid:
    """Evenly spaced interpolation fractions h in the open interval (0, 1)."""

    h_min: float = 0.025
    h_max: float = 0.975
    h_step: float = 0.025

    def __post_init__(self):
        if not (0.0 < self.h_min <= self.h_max < 1.0):
            raise ViewaugError(f"need 0 < h_min <= h_max < 1, got [{self.h_min}, {self.h_max}]")
        if self.h_step <= 0.0:
            raise ViewaugError(f"h_step must be positive, got {self.h_step}")

    def values(self) -> list[float]:
        # the small bias absorbs accumulated representation error so a grid
        # like 0.025..0.975 step 0.025 really has 39 entries, not 38
        n = int(math.floor((self.h_max - self.h_min) / self.h_step + 1e-9)) + 1
        return [self.h_min + i * self.h_step for i in range(n)]


@dataclass(frozen=True)
class SampledPose:
    """One synthesized viewpoint on the arc between two cameras.

    `source_index` names the endpoint whose point cloud supplies the
    geometry reprojected into this view: the nearer of the two (so views
    swung mostly toward the neighbor borrow the neighbor's geometry).
    `h` is always measured from the lower-index endpoint, so it stays a
    grid value regardless of which endpoint became the source.
    """

    pose: CameraPose
    source_index: int
    neighbor_index: int
    h: float

    def __post_init__(self):
        if self.source_index == self.neighbor_index:
            raise ViewaugError("source and neighbor must be distinct cameras")


def slerp(qa: UnitQuaternion, qb: UnitQuaternion, h: float) -> UnitQuaternion:
    """Spherical linear interpolation between two rotations.

    Walks the shorter of the two great-circle arcs (hemisphere-corrected)
    at constant angular speed. Falls back to normalized linear
    interpolation when the endpoints are nearly identical.
    """
    if not (0.0 <= h <= 1.0):
        raise ViewaugError(f"interpolation fraction must lie in [0, 1], got {h}")
    if h == 0.0:
        return qa
    if h == 1.0:
        return qb
    va = qa.as_array()
    vb = qb.as_array()
    dot = float(va @ vb)
    if dot < 0.0:
        vb = -vb
        dot = -dot
    dot = min(dot, 1.0)
    theta = math.acos(dot)
    if theta < SMALL_ANGLE:
        v = (1.0 - h) * va + h * vb
    else:
        s = math.sin(theta)
        v = (math.sin((1.0 - h) * theta) / s) * va + (math.sin(h * theta) / s) * vb
    v = v / np.linalg.norm(v)
    return UnitQuaternion(*v)


def _slerp_direction(da: np.ndarray, db: np.ndarray, h: float) -> np.ndarray:
    """Interpolate between two unit vectors along their great circle."""
    dot = min(1.0, max(-1.0, float(da @ db)))
    phi = math.acos(dot)
    if phi > math.pi - 1e-6:
        raise DegenerateGeometryError(
            "cameras sit on opposite sides of the scene center; the arc between them is undefined"
        )
    if phi < SMALL_ANGLE:
        v = (1.0 - h) * da + h * db
    else:
        s = math.sin(phi)
        v = (math.sin((1.0 - h) * phi) / s) * da + (math.sin(h * phi) / s) * db
    return v / np.linalg.norm(v)


def interpolate_pose(
    pose_a: CameraPose,
    pose_b: CameraPose,
    h: float,
    scene_center,
) -> CameraPose:
    """Blend two world-to-camera poses at fraction h of the way from a to b.

    Orientation follows the rotation slerp. The camera position orbits:
    its direction from the scene center is slerped between the endpoint
    directions and its distance interpolates linearly, so intermediate
    cameras stay on a smooth arc around the subject instead of drifting
    toward it.
    """
    if not (0.0 <= h <= 1.0):
        raise ViewaugError(f"interpolation fraction must lie in [0, 1], got {h}")
    center = np.asarray(scene_center, dtype=np.float64).reshape(3)
    qa = pose_to_quaternion(pose_a)
    qb = pose_to_quaternion(pose_b)
    q_h = slerp(qa, qb, h)
    R_h = quaternion_to_rotation(q_h)

    da = camera_center(pose_a) - center
    db = camera_center(pose_b) - center
    ra = float(np.linalg.norm(da))
    rb = float(np.linalg.norm(db))
    if ra < 1e-9 or rb < 1e-9:
        raise DegenerateGeometryError("camera coincides with the scene center")
    dir_h = _slerp_direction(da / ra, db / rb, h)
    r_h = (1.0 - h) * ra + h * rb
    C_h = center + r_h * dir_h
    return CameraPose(R=R_h, t=-(R_h @ C_h))


def nearest_cameras(centers: np.ndarray, index: int, count: int = 2) -> list[int]:
    """Indices of the `count` cameras closest to camera `index`.

    Distance ties resolve to the lower index so the result is deterministic
    regardless of input order jitter. Needs at least count + 1 cameras.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != 3:
        raise ShapeMismatchError(f"centers must be (N, 3), got {centers.shape}")
    n = len(centers)
    if n < count + 1:
        raise InsufficientViewsError(f"need at least {count + 1} cameras, got {n}")
    d = np.linalg.norm(centers - centers[index], axis=1)
    order = sorted(i for i in range(n) if i != index)
    order.sort(key=lambda i: (d[i], i))
    return order[:count]


def sample_poses(
    poses: list[CameraPose],
    scene_center,
    grid: InterpolationGrid | None = None,
    neighbor_count: int = 2,
) -> list[SampledPose]:
    """Synthesize viewpoints on arcs linking each camera to its neighbours.

    Each camera contributes arcs to its `neighbor_count` nearest peers;
    arcs are undirected, so one shared between two cameras is generated
    once. Output order is deterministic: arcs sorted by (low index, high
    index), then ascending h within each arc.
    """
    if grid is None:
        grid = InterpolationGrid()
    n = len(poses)
    if n < neighbor_count + 1:
        raise InsufficientViewsError(
            f"need at least {neighbor_count + 1} cameras to interpolate, got {n}"
        )
    centers = np.stack([camera_center(p) for p in poses])
    arcs = set()
    for i in range(n):
        for j in nearest_cameras(centers, i, neighbor_count):
            arcs.add((min(i, j), max(i, j)))
    out = []
    for a, b in sorted(arcs):
        for h in grid.values():
            pose = interpolate_pose(poses[a], poses[b], h, scene_center)
            src, nbr = (a, b) if h <= 0.5 else (b, a)
            out.append(SampledPose(pose=pose, source_index=src, neighbor_index=nbr, h=h))
    return out
