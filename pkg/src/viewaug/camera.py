"""Pinhole camera model, rigid transforms, and quaternion conversions.

Conventions used throughout the package:
  * CameraPose stores the world-to-camera transform; the camera looks down
    its own +z axis.
  * Pixel coordinates (u, v) have the origin at the top-left, u rightward,
    v downward, with the center of pixel (row=0, col=0) at (u, v) = (0, 0).
  * Projected coordinates stay continuous (sub-pixel); rounding is the
    renderer's business.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidDepthError,
    InvalidQuaternionError,
    InvalidRotationError,
    ShapeMismatchError,
)

ROTATION_TOL = 1e-9
QUATERNION_NORM_TOL = 1e-6
MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics shared by every view of a scene.

    Focal lengths and principal point are in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ShapeMismatchError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ShapeMismatchError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )


def intrinsics_from_fov(width: int, height: int, camera_angle_x: float) -> Intrinsics:
    """Derive pinhole intrinsics from the horizontal field of view (radians)."""
    fx = 0.5 * width / math.tan(0.5 * camera_angle_x)
    return Intrinsics(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: x_cam = R @ x_world + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise InvalidRotationError(f"rotation must be 3x3, got {R.shape}")
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > ROTATION_TOL:
            raise InvalidRotationError(f"R is not orthonormal (max |R^T R - I| = {err:.3e})")
        det = np.linalg.det(R)
        if abs(det - 1.0) > ROTATION_TOL:
            raise InvalidRotationError(f"det(R) = {det!r}, expected +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        self.R.setflags(write=False)
        self.t.setflags(write=False)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous world-to-camera matrix."""
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "CameraPose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidRotationError(f"pose matrix must be 4x4, got {m.shape}")
        return CameraPose(R=m[:3, :3], t=m[:3, 3])


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion, scalar-first, canonicalized so w >= 0.

    q and -q encode the same rotation; the canonical sign makes equality
    and deterministic ordering meaningful.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > QUATERNION_NORM_TOL:
            raise InvalidQuaternionError(f"quaternion norm {n!r} too far from 1")
        w, x, y, z = self.w / n, self.x / n, self.y / n, self.z / n
        if (w < 0.0) or (w == 0.0 and (x < 0.0 or (x == 0.0 and (y < 0.0 or (y == 0.0 and z < 0.0))))):
            w, x, y, z = -w, -x, -y, -z
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def dot(self, other: "UnitQuaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Rotation angle (radians) between the two rotations, in [0, pi]."""
        return 2.0 * math.acos(min(1.0, abs(self.dot(other))))


def pose_to_quaternion(pose: CameraPose) -> UnitQuaternion:
    """Convert a pose's rotation matrix to a canonical unit quaternion.

    Uses the trace-branching construction: pick the largest diagonal-based
    pivot so the division is always well conditioned.
    """
    R = pose.R
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return UnitQuaternion(w, x, y, z)


def quaternion_to_rotation(q: UnitQuaternion) -> np.ndarray:
    """Rotation matrix of a unit quaternion (validated at construction)."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def camera_center(pose: CameraPose) -> np.ndarray:
    """Camera position in world coordinates: C = -R^T t."""
    return -(pose.R.T @ pose.t)


def project(point, intr: Intrinsics, pose: CameraPose):
    """Project a world point to continuous pixel coordinates and depth.

    Returns (u, v, depth) with depth the camera-frame z coordinate. Points
    at depth <= MIN_DEPTH are behind (or on) the camera plane; they are
    flagged with u = v = NaN and must be skipped by callers, not raised.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(p)):
        raise InvalidDepthError(f"point must be finite, got {p}")
    R, t = pose.R, pose.t
    # Expression order here is mirrored by project_points so the two paths
    # are bit-identical; keep them in sync.
    xc = R[0, 0] * p[0] + R[0, 1] * p[1] + R[0, 2] * p[2] + t[0]
    yc = R[1, 0] * p[0] + R[1, 1] * p[1] + R[1, 2] * p[2] + t[1]
    zc = R[2, 0] * p[0] + R[2, 1] * p[1] + R[2, 2] * p[2] + t[2]
    if zc <= MIN_DEPTH:
        return (math.nan, math.nan, float(zc))
    u = (intr.fx * xc) / zc + intr.cx
    v = (intr.fy * yc) / zc + intr.cy
    return (float(u), float(v), float(zc))


def project_points(points: np.ndarray, intr: Intrinsics, pose: CameraPose):
    """Vectorized projection of an (N, 3) array of world points.

    Returns (u, v, depth, valid) where valid marks depth > MIN_DEPTH.
    Invalid entries keep their depth but carry NaN pixel coordinates.
    Arithmetic matches the scalar `project` bit for bit.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeMismatchError(f"points must be (N, 3), got {pts.shape}")
    R, t = pose.R, pose.t
    p0, p1, p2 = pts[:, 0], pts[:, 1], pts[:, 2]
    xc = R[0, 0] * p0 + R[0, 1] * p1 + R[0, 2] * p2 + t[0]
    yc = R[1, 0] * p0 + R[1, 1] * p1 + R[1, 2] * p2 + t[1]
    zc = R[2, 0] * p0 + R[2, 1] * p1 + R[2, 2] * p2 + t[2]
    valid = zc > MIN_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(valid, (intr.fx * xc) / zc + intr.cx, np.nan)
        v = np.where(valid, (intr.fy * yc) / zc + intr.cy, np.nan)
    return u, v, zc, valid


def back_project(u: float, v: float, depth: float, intr: Intrinsics, pose: CameraPose) -> np.ndarray:
    """Lift a pixel with known depth back to a world point."""
    if not (math.isfinite(depth) and depth > 0):
        raise InvalidDepthError(f"depth must be finite and positive, got {depth}")
    xc = (u - intr.cx) / intr.fx * depth
    yc = (v - intr.cy) / intr.fy * depth
    p_cam = np.array([xc, yc, depth])
    return pose.R.T @ (p_cam - pose.t)


def look_at(center, target, up=(0.0, 0.0, 1.0)) -> CameraPose:
    """World-to-camera pose for a camera at `center` looking at `target`.

    `up` is a world-space hint for the image's upward direction; the camera
    y axis points the opposite way (v grows downward).
    """
    center = np.asarray(center, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - center
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise InvalidRotationError("look_at target coincides with camera center")
    z = z / nz
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        # viewing direction parallel to the up hint; fall back to another axis
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
        nx = np.linalg.norm(x)
    x = x / nx
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    # re-orthonormalize to keep the constructor's tolerance comfortable
    u_svd, _, vt = np.linalg.svd(R)
    R = u_svd @ vt
    return CameraPose(R=R, t=-(R @ center))
