import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundpose.errors import DegenerateScaleError, InvalidHomographyError, InvalidInputError
from groundpose.geom import (
    Correspondence,
    GroundHomography,
    ImuAttitude,
    Intrinsics,
    PixelPoint,
    compose_world_pose,
    ground_homography_to_pose,
    hy_from_pixel_homography,
    normalize_ground_homography,
    orthonormalize,
    pixel_homography,
    rectify,
    rot_x,
    rot_y,
)
from groundpose.synth import InstanceConfig, generate_instance

from conftest import random_rotation

angles = st.floats(-math.pi + 1e-6, math.pi - 1e-6)
coords = st.floats(-5.0, 5.0)


class TestRectify:
    def test_origin_identity(self):
        np.testing.assert_array_equal(rectify((0.0, 0.0), np.eye(3), 1.0), [0.0, 0.0, 1.0])

    def test_pure_focal_scaling(self):
        # K^-1 (100, 0, 1) with f = 100
        y = rectify(PixelPoint(100.0, 0.0), ImuAttitude.identity(), Intrinsics(100.0))
        np.testing.assert_allclose(y, [1.0, 0.0, 1.0], atol=1e-15)
        y2 = rectify((100.0, 0.0), np.eye(3), 200.0)
        np.testing.assert_allclose(np.cross(y2, [0.5, 0.0, 1.0]), 0.0, atol=1e-15)

    def test_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            A = random_rotation(rng)
            f = rng.uniform(100, 2000)
            x = rng.uniform(-500, 500, size=2)
            oracle = A.T @ np.linalg.inv(np.diag([f, f, 1.0])) @ np.array([*x, 1.0])
            np.testing.assert_allclose(rectify(x, A, f), oracle, rtol=1e-14, atol=1e-15)

    def test_batched_rows_match_single(self):
        rng = np.random.default_rng(4)
        A, xs = random_rotation(rng), rng.normal(size=(6, 2)) * 300
        batch = rectify(xs, A, 700.0)
        for x, y in zip(xs, batch):
            np.testing.assert_allclose(rectify(x, A, 700.0), y, rtol=1e-15)

    @pytest.mark.parametrize("x", [(math.nan, 0.0), (0.0, math.inf)])
    def test_non_finite_pixel(self, x):
        with pytest.raises(InvalidInputError):
            rectify(x, np.eye(3), 500.0)

    def test_bad_focal(self):
        with pytest.raises(InvalidInputError):
            rectify((1.0, 2.0), np.eye(3), 0.0)
        with pytest.raises(InvalidInputError):
            Intrinsics(-3.0)


class TestDecomposition:
    def test_identity(self):
        pose = ground_homography_to_pose(GroundHomography(1, 0, 0, 1, 0))
        np.testing.assert_array_equal(pose.R, np.eye(3))
        assert pose.is_pure_rotation and pose.yaw == 0.0

    def test_pure_yaw(self):
        a = math.radians(30)
        pose = ground_homography_to_pose(GroundHomography(math.cos(a), math.sin(a), 0, 1, 0))
        assert pose.yaw == pytest.approx(a, abs=1e-15)
        assert pose.t_norm == 0.0

    def test_trig_violation(self):
        with pytest.raises(InvalidHomographyError):
            ground_homography_to_pose(GroundHomography(1.0, 0.01, 0, 1, 0))

    @settings(max_examples=200, deadline=None)
    @given(angles, coords, coords, coords)
    def test_round_trip(self, yaw, tx, ty, tz):
        t = np.array([tx, ty, tz])
        pose = ground_homography_to_pose(GroundHomography.from_motion(yaw, t))
        assert pose.yaw == pytest.approx(yaw, abs=1e-10)
        np.testing.assert_allclose(pose.R, rot_y(yaw), atol=1e-12)
        np.testing.assert_allclose(pose.t * pose.t_norm, t, atol=1e-10)

    def test_forward_matrix_is_rotation_plus_rank_one(self):
        t = np.array([0.3, -0.2, 0.5])
        H = GroundHomography.from_motion(0.7, t).matrix()
        np.testing.assert_allclose(H, rot_y(0.7) + np.outer(t, [0, 1, 0]), atol=1e-15)


class TestCompose:
    def test_identity_attitudes(self):
        rel = ground_homography_to_pose(GroundHomography.from_motion(0.4, [0.1, 0.2, 0.3]))
        out = compose_world_pose(rel, np.eye(3), np.eye(3))
        np.testing.assert_allclose(out.R, rel.R, atol=1e-15)
        np.testing.assert_allclose(out.t, rel.t, atol=1e-15)

    def test_equal_attitudes_conjugate_identity(self):
        rel = ground_homography_to_pose(GroundHomography(1, 0, 0, 1, 0))
        A = rot_x(math.radians(10))
        np.testing.assert_allclose(compose_world_pose(rel, A, A).R, np.eye(3), atol=1e-15)

    def test_matches_camera_matrices(self):
        # full cameras: X_cam = Rc (X - C), Rc = A rot_y(yaw)
        for seed in range(30):
            inst = generate_instance(seed)
            Rc1, Rc2 = inst.camera_rotation(0), inst.camera_rotation(1)
            C1, C2 = inst.centers
            R_oracle = Rc2 @ Rc1.T
            t_oracle = Rc2 @ (C1 - C2)
            pose = inst.gt_pose
            np.testing.assert_allclose(pose.R, R_oracle, atol=1e-12)
            np.testing.assert_allclose(pose.t, t_oracle / np.linalg.norm(t_oracle), atol=1e-12)


class TestNormalize:
    def test_two_signs(self):
        chosen, (plus, minus) = normalize_ground_homography([2, 0, 0, 2, 0])
        assert plus == GroundHomography(1, 0, 0, 1, 0)
        assert minus == GroundHomography(-1, 0, 0, -1, 0)
        assert chosen == plus

    def test_prefers_positive_h4(self):
        chosen, _ = normalize_ground_homography([-2, 0, 0, -2, 0])
        assert chosen.h4 > 0

    def test_zero_rotation_block(self):
        with pytest.raises(DegenerateScaleError):
            normalize_ground_homography([0, 0, 1, 1, 1])

    @settings(max_examples=100, deadline=None)
    @given(angles, coords, coords, coords)
    def test_scale_round_trip(self, yaw, a, b, c):
        h = GroundHomography.from_motion(yaw, [a, b, c]).as_vector()
        chosen, (plus, _) = normalize_ground_homography(7.3 * h)
        assert plus.is_normalized()
        np.testing.assert_allclose(plus.as_vector(), h, atol=1e-12)


class TestPixelHomography:
    def test_identity(self):
        H = np.eye(3)
        np.testing.assert_allclose(hy_from_pixel_homography(H, np.eye(3), np.eye(3), 1, 1), H)

    def test_inverse_construction(self):
        Hy = GroundHomography.from_motion(0.3, [0.2, -0.1, 0.4]).matrix()
        K1, K2 = np.diag([400, 400, 1.0]), np.diag([900, 900, 1.0])
        back = hy_from_pixel_homography(K2 @ Hy @ np.linalg.inv(K1), np.eye(3), np.eye(3), 400, 900)
        np.testing.assert_allclose(back, Hy, atol=1e-12)

    def test_random_setup_matches_oracle_and_inverts(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            A1, A2 = random_rotation(rng), random_rotation(rng)
            f1, f2 = rng.uniform(200, 1500, size=2)
            h = GroundHomography.from_motion(rng.uniform(-3, 3), rng.normal(size=3))
            K1, K2 = np.diag([f1, f1, 1]), np.diag([f2, f2, 1])
            H = pixel_homography(h, A1, A2, f1, f2)
            np.testing.assert_allclose(H, K2 @ A2 @ h.matrix() @ A1.T @ np.linalg.inv(K1),
                                       rtol=1e-12, atol=1e-12)
            back = hy_from_pixel_homography(H, A1, A2, f1, f2)
            np.testing.assert_allclose(back, h.matrix(), atol=1e-10)

    def test_ground_truth_maps_clean_pixels(self):
        inst = generate_instance(11, InstanceConfig(n_planar=20, focal_mode="f1hf2"))
        H = pixel_homography(inst.gt_homography, inst.R1, inst.R2, *inst.focals)
        z = np.column_stack([inst.x1, np.ones(inst.n)]) @ H.T
        np.testing.assert_allclose(z[:, :2] / z[:, 2:], inst.x2, atol=1e-9)


class TestTypes:
    def test_attitude_must_be_rotation(self):
        with pytest.raises(InvalidInputError):
            ImuAttitude(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(InvalidInputError):
            ImuAttitude(2 * np.eye(3))

    def test_attitude_from_pitch_roll(self):
        a = ImuAttitude.from_pitch_roll(0.2, -0.1)
        assert a == ImuAttitude(a.matrix.copy())

    def test_homography_vector_shape(self):
        with pytest.raises(InvalidInputError):
            GroundHomography.from_vector([1, 0, 0, 1])

    def test_orthonormalize_recovers_rotation(self):
        R = rot_y(0.5) @ rot_x(0.2)
        np.testing.assert_allclose(orthonormalize(R + 1e-4), R, atol=1e-3)
        out = orthonormalize(R + 1e-4)
        np.testing.assert_allclose(out.T @ out, np.eye(3), atol=1e-14)

    def test_correspondence_from_arrays(self):
        c = Correspondence.from_arrays([1, 2], [3, 4], np.eye(3), np.eye(3))
        assert c.x2 == PixelPoint(3.0, 4.0)
        assert c.attitudes[0] == ImuAttitude.identity()
