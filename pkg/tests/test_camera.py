import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewaug.camera import (
    CameraPose,
    Intrinsics,
    UnitQuaternion,
    back_project,
    camera_center,
    intrinsics_from_fov,
    look_at,
    pose_to_quaternion,
    project,
    project_points,
    quaternion_to_rotation,
)
from viewaug.errors import (
    InvalidDepthError,
    InvalidQuaternionError,
    InvalidRotationError,
    ShapeMismatchError,
)


def rodrigues(axis, angle):
    """Independent rotation-matrix oracle from axis-angle."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = np.array(
        [
            [0, -axis[2], axis[1]],
            [axis[2], 0, -axis[0]],
            [-axis[1], axis[0], 0],
        ]
    )
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def random_pose(rng):
    R = rodrigues(rng.normal(size=3), rng.uniform(0, math.pi))
    return CameraPose(R=R, t=rng.normal(size=3))


INTR = Intrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0, width=64, height=48)


class TestValidation:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(InvalidRotationError):
            CameraPose(R=np.eye(3) * 1.001, t=np.zeros(3))

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvalidRotationError):
            CameraPose(R=R, t=np.zeros(3))

    def test_rejects_bad_quaternion_norm(self):
        with pytest.raises(InvalidQuaternionError):
            UnitQuaternion(1.0, 1.0, 0.0, 0.0)

    def test_quaternion_canonical_sign(self):
        q = UnitQuaternion(-1.0, 0.0, 0.0, 0.0)
        assert q.w == 1.0
        q = UnitQuaternion(0.0, -1.0, 0.0, 0.0)
        assert q.x == 1.0

    def test_rejects_bad_intrinsics(self):
        with pytest.raises(ShapeMismatchError):
            Intrinsics(fx=-1.0, fy=1.0, cx=0.0, cy=0.0, width=4, height=4)
        with pytest.raises(ShapeMismatchError):
            Intrinsics(fx=1.0, fy=1.0, cx=10.0, cy=0.0, width=4, height=4)

    def test_pose_arrays_are_frozen(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        with pytest.raises(ValueError):
            pose.R[0, 0] = 2.0


class TestQuaternionConversion:
    def test_identity(self):
        q = pose_to_quaternion(CameraPose(R=np.eye(3), t=np.zeros(3)))
        assert q.as_array() == pytest.approx([1.0, 0.0, 0.0, 0.0], abs=1e-15)

    def test_quarter_turn_about_z(self):
        R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        q = pose_to_quaternion(CameraPose(R=R, t=np.zeros(3)))
        s = math.sqrt(0.5)
        assert q.as_array() == pytest.approx([s, 0.0, 0.0, s], abs=1e-12)

    def test_half_turn_about_x(self):
        # w = 0 here, exercising the trace <= 0 branch and the sign tie-break
        R = np.diag([1.0, -1.0, -1.0])
        q = pose_to_quaternion(CameraPose(R=R, t=np.zeros(3)))
        assert q.as_array() == pytest.approx([0.0, 1.0, 0.0, 0.0], abs=1e-12)

    def test_round_trip_against_rodrigues(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            axis = rng.normal(size=3)
            angle = rng.uniform(0, math.pi)
            R = rodrigues(axis, angle)
            q = pose_to_quaternion(CameraPose(R=R, t=np.zeros(3)))
            back = quaternion_to_rotation(q)
            assert np.abs(back - R).max() < 1e-12

    def test_all_pivot_branches(self):
        # near-180-degree turns about each axis hit each pivot branch
        for axis in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
            R = rodrigues(axis, math.pi - 1e-3)
            q = pose_to_quaternion(CameraPose(R=R, t=np.zeros(3)))
            assert np.abs(quaternion_to_rotation(q) - R).max() < 1e-12


class TestProjection:
    def test_principal_ray(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        u, v, d = project([0.0, 0.0, 2.0], INTR, pose)
        assert (u, v, d) == (32.0, 24.0, 2.0)

    def test_known_offset(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        u, v, d = project([0.1, -0.2, 1.0], INTR, pose)
        assert u == pytest.approx(42.0)
        assert v == pytest.approx(4.0)

    def test_behind_camera_flagged_nan(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        u, v, d = project([0.0, 0.0, -1.0], INTR, pose)
        assert math.isnan(u) and math.isnan(v)
        assert d == -1.0

    def test_nonfinite_point_raises(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        with pytest.raises(InvalidDepthError):
            project([np.inf, 0.0, 1.0], INTR, pose)

    def test_vectorized_matches_scalar_bitwise(self):
        rng = np.random.default_rng(11)
        pose = random_pose(rng)
        pts = rng.normal(size=(200, 3)) * 3.0
        u, v, z, valid = project_points(pts, INTR, pose)
        for i in range(len(pts)):
            su, sv, sz = project(pts[i], INTR, pose)
            assert z[i] == sz
            if valid[i]:
                assert u[i] == su and v[i] == sv
            else:
                assert math.isnan(u[i]) and math.isnan(su)

    def test_project_points_shape_check(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        with pytest.raises(ShapeMismatchError):
            project_points(np.zeros((3, 4)), INTR, pose)


class TestBackProjection:
    def test_round_trip_identity_pose(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        p = back_project(42.0, 4.0, 1.0, INTR, pose)
        assert p == pytest.approx([0.1, -0.2, 1.0])

    def test_round_trip_random_poses(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            pose = random_pose(rng)
            C = camera_center(pose)
            # sample a point guaranteed in front of the camera
            dir_cam = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.0])
            p = pose.R.T @ (dir_cam * rng.uniform(0.5, 5.0) - pose.t)
            u, v, d = project(p, INTR, pose)
            assert d > 0
            back = back_project(u, v, d, INTR, pose)
            assert np.abs(back - p).max() < 1e-9
            # camera center projects to depth 0 (invalid)
            _, _, dc = project(C, INTR, pose)
            assert abs(dc) < 1e-9

    def test_rejects_nonpositive_depth(self):
        pose = CameraPose(R=np.eye(3), t=np.zeros(3))
        with pytest.raises(InvalidDepthError):
            back_project(0.0, 0.0, 0.0, INTR, pose)
        with pytest.raises(InvalidDepthError):
            back_project(0.0, 0.0, math.inf, INTR, pose)


class TestCenterAndLookAt:
    def test_camera_center_formula(self):
        rng = np.random.default_rng(5)
        pose = random_pose(rng)
        C = camera_center(pose)
        assert np.abs(pose.R @ C + pose.t).max() < 1e-12

    def test_look_at_points_camera_at_target(self):
        pose = look_at([4.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        u, v, d = project([0.0, 0.0, 0.0], INTR, pose)
        assert (u, v) == pytest.approx((INTR.cx, INTR.cy), abs=1e-9)
        assert d == pytest.approx(4.0)

    def test_look_at_up_hint(self):
        # with the default +z up hint, a world point above the target
        # should land above the principal point (smaller v)
        pose = look_at([4.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        _, v_up, _ = project([0.0, 0.0, 0.5], INTR, pose)
        assert v_up < INTR.cy

    def test_look_at_degenerate_direction(self):
        with pytest.raises(InvalidRotationError):
            look_at([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_look_at_parallel_up_falls_back(self):
        pose = look_at([0.0, 0.0, 5.0], [0.0, 0.0, 0.0], up=(0.0, 0.0, 1.0))
        u, v, d = project([0.0, 0.0, 0.0], INTR, pose)
        assert d == pytest.approx(5.0)


class TestIntrinsicsFromFov:
    def test_frozen_example(self):
        intr = intrinsics_from_fov(800, 800, 0.6911112070083618)
        assert intr.fx == pytest.approx(1111.1110311937682, abs=1e-9)
        assert intr.cx == 400.0 and intr.cy == 400.0

    def test_ninety_degree_fov(self):
        intr = intrinsics_from_fov(100, 80, math.pi / 2)
        assert intr.fx == pytest.approx(50.0)


@settings(max_examples=100, deadline=None)
@given(
    axis=st.tuples(
        st.floats(-1, 1, allow_nan=False),
        st.floats(-1, 1, allow_nan=False),
        st.floats(-1, 1, allow_nan=False),
    ).filter(lambda a: sum(x * x for x in a) > 1e-4),
    angle=st.floats(0.0, math.pi, allow_nan=False),
)
def test_quaternion_round_trip_property(axis, angle):
    R = rodrigues(axis, angle)
    q = pose_to_quaternion(CameraPose(R=R, t=np.zeros(3)))
    assert np.abs(quaternion_to_rotation(q) - R).max() < 1e-11
    assert q.w >= 0.0
