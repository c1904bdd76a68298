import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadfuse.geometry import (
    BehindCamera,
    Box2D,
    Box3D,
    CameraModel,
    Pose3,
    RayParallel,
    ZeroUnion,
    iou_axis_aligned,
    iou_bev,
    normalize_yaw,
    pixel_to_ground,
    project_to_pixel,
    transform_point,
)
from oracles import monte_carlo_iou_bev, raster_iou_aabb


def random_pose(rng):
    # Random rotation via QR of a Gaussian matrix, fixed to det +1.
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return Pose3(q, rng.uniform(-5, 5, size=3))


class TestPose3:
    def test_identity_transform(self):
        assert np.allclose(transform_point(Pose3.identity(), [1, 2, 3]), [1, 2, 3])

    def test_pure_translation(self):
        p = Pose3(np.eye(3), [1, 0, 0])
        assert np.allclose(transform_point(p, [0, 0, 0]), [1, 0, 0])

    def test_yaw_90_rotation(self):
        # Hand-written rotation: 90 degrees about z maps +x to +y.
        p = Pose3.from_yaw(math.pi / 2)
        assert np.allclose(transform_point(p, [1, 0, 0]), [0, 1, 0], atol=1e-9)

    def test_inverse_roundtrip_random(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            p = random_pose(rng)
            x = rng.uniform(-10, 10, size=3)
            back = transform_point(p.inverse(), transform_point(p, x))
            assert np.linalg.norm(back - x) < 1e-9

    def test_compose_inverse_is_identity(self):
        rng = np.random.default_rng(7)
        p = random_pose(rng)
        ident = p.inverse().compose(p)
        assert np.linalg.norm(ident.rotation - np.eye(3)) < 1e-9
        assert np.linalg.norm(ident.translation) < 1e-9

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose3(np.eye(3) * 2.0, np.zeros(3))

    def test_rejects_reflection(self):
        r = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            Pose3(r, np.zeros(3))


def make_forward_camera(focal=1000.0, size=(1920, 1080)):
    """Camera at origin looking along +x, level with the ground."""
    return CameraModel.from_mount([0.0, 0.0, 0.0], yaw=0.0, pitch=0.0,
                                  focal_px=focal, image_size=size)


class TestProjection:
    def test_on_axis_point_hits_principal_point(self):
        cam = make_forward_camera()
        for depth in (0.5, 1.0, 7.5):
            px, z = project_to_pixel(cam, [depth, 0.0, 0.0])
            assert np.allclose(px, [960.0, 540.0])
            assert z == pytest.approx(depth)

    def test_behind_camera_raises(self):
        cam = make_forward_camera()
        with pytest.raises(BehindCamera):
            project_to_pixel(cam, [-1.0, 0.0, 0.0])
        with pytest.raises(BehindCamera):
            project_to_pixel(cam, [0.0, 0.0, 0.0])

    def test_scalar_pinhole_arithmetic(self):
        # f=1000 px, principal (960, 540), camera-frame point (0.1, 0, 1.0):
        # u = 960 + 1000 * 0.1 / 1.0 = 1060, v = 540.
        cam = make_forward_camera()
        # camera frame (0.1, 0, 1.0) corresponds to world (1.0, -0.1, 0) for
        # the +x-looking camera (camera x right = world -y).
        px, z = project_to_pixel(cam, [1.0, -0.1, 0.0])
        assert np.allclose(px, [1060.0, 540.0], atol=1e-9)
        assert z == pytest.approx(1.0)

    def test_focal_must_be_positive(self):
        with pytest.raises(ValueError):
            CameraModel(np.diag([-1.0, 1.0, 1.0]), Pose3.identity(), (640, 480))

    def test_principal_point_must_be_inside(self):
        k = np.array([[100.0, 0, 5000.0], [0, 100.0, 50.0], [0, 0, 1]])
        with pytest.raises(ValueError):
            CameraModel(k, Pose3.identity(), (640, 480))


class TestPixelToGround:
    def test_nadir_principal_point_is_below_camera(self):
        cam = CameraModel.from_mount([2.0, 3.0, 5.0], yaw=0.0, pitch=math.pi / 2,
                                     focal_px=800.0, image_size=(1280, 720))
        ground = pixel_to_ground(cam, cam.principal_point, 0.0)
        assert np.allclose(ground, [2.0, 3.0, 0.0], atol=1e-9)

    def test_roundtrip_oblique(self):
        cam = CameraModel.from_mount([1.0, -2.0, 4.0], yaw=0.9, pitch=0.7,
                                     focal_px=1200.0, image_size=(1920, 1080))
        rng = np.random.default_rng(3)
        for _ in range(10):
            p = np.array([rng.uniform(2, 7), rng.uniform(-1, 5), rng.uniform(0, 0.5)])
            px, _ = project_to_pixel(cam, p)
            back = pixel_to_ground(cam, px, p[2])
            assert np.linalg.norm(back - p) < 1e-6

    def test_roundtrip_within_half_pixel(self):
        cam = CameraModel.from_mount([0.0, 0.0, 3.0], yaw=0.3, pitch=0.6,
                                     focal_px=1000.0, image_size=(1920, 1080))
        rng = np.random.default_rng(11)
        for _ in range(20):
            p = np.array([rng.uniform(1, 8), rng.uniform(-3, 3), rng.uniform(0, 0.3)])
            try:
                px, _ = project_to_pixel(cam, p)
            except BehindCamera:
                continue
            back = pixel_to_ground(cam, px, p[2])
            px2, _ = project_to_pixel(cam, back)
            assert np.linalg.norm(px2 - px) < 0.5

    def test_parallel_ray_raises(self):
        cam = make_forward_camera()  # level camera: principal ray is horizontal
        with pytest.raises(RayParallel):
            pixel_to_ground(cam, [960.0, 540.0], target_height=-1.0)


class TestIouAxisAligned:
    def test_identical(self):
        b = Box2D(0, 0, 4, 3)
        assert iou_axis_aligned(b, b) == 1.0

    def test_disjoint(self):
        assert iou_axis_aligned(Box2D(0, 0, 1, 1), Box2D(2, 2, 3, 3)) == 0.0

    def test_overlap_one_seventh(self):
        # [0,0]-[2,2] vs [1,1]-[3,3]: intersection 1, union 7.
        a = Box2D(0, 0, 2, 2)
        b = Box2D(1, 1, 3, 3)
        got = iou_axis_aligned(a, b)
        assert got == pytest.approx(1.0 / 7.0, abs=1e-12)
        assert got == pytest.approx(raster_iou_aabb(a, b, 0.001), abs=2e-3)

    def test_zero_union_raises(self):
        degenerate = Box2D(1, 1, 1, 1)
        with pytest.raises(ZeroUnion):
            iou_axis_aligned(degenerate, degenerate)

    @given(st.tuples(*[st.floats(-50, 50) for _ in range(4)]),
           st.tuples(*[st.floats(-50, 50) for _ in range(4)]))
    def test_symmetry(self, ca, cb):
        a = Box2D(min(ca[0], ca[2]), min(ca[1], ca[3]), max(ca[0], ca[2]), max(ca[1], ca[3]))
        b = Box2D(min(cb[0], cb[2]), min(cb[1], cb[3]), max(cb[0], cb[2]), max(cb[1], cb[3]))
        try:
            ab = iou_axis_aligned(a, b)
        except ZeroUnion:
            return
        assert ab == iou_axis_aligned(b, a)
        assert 0.0 <= ab <= 1.0


class TestBox3D:
    def test_rejects_non_positive_dims(self):
        with pytest.raises(ValueError):
            Box3D([0, 0, 0], (1.0, 0.0, 1.0))

    def test_yaw_normalized(self):
        assert Box3D([0, 0, 0], (1, 1, 1), yaw=3 * math.pi).yaw == pytest.approx(math.pi)
        assert Box3D([0, 0, 0], (1, 1, 1), yaw=-math.pi).yaw == math.pi

    def test_normalize_yaw_ties(self):
        assert normalize_yaw(-math.pi) == math.pi
        assert normalize_yaw(math.pi) == math.pi
        assert normalize_yaw(0.0) == 0.0
        assert normalize_yaw(2 * math.pi) == pytest.approx(0.0, abs=1e-12)


class TestIouBev:
    def test_identical_rotated(self):
        b = Box3D([1, 2, 0.5], (2.0, 1.0, 1.0), yaw=0.7)
        assert iou_bev(b, b) == 1.0

    def test_square_quarter_turn(self):
        a = Box3D([0, 0, 0.5], (2.0, 2.0, 1.0), yaw=0.0)
        b = Box3D([0, 0, 0.5], (2.0, 2.0, 1.0), yaw=math.pi / 2)
        assert iou_bev(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_unit_squares_eighth_turn(self):
        # Unit squares at the same center, yaw 0 vs pi/4: octagonal overlap,
        # IOU = 2(sqrt(2)-1) / (2 - 2(sqrt(2)-1)) = 1/sqrt(2).
        a = Box3D([0, 0, 0.5], (1.0, 1.0, 1.0), yaw=0.0)
        b = Box3D([0, 0, 0.5], (1.0, 1.0, 1.0), yaw=math.pi / 4)
        got = iou_bev(a, b)
        assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)
        mc = monte_carlo_iou_bev(a, b, samples=1_000_000, seed=5)
        assert got == pytest.approx(mc, abs=1e-3)

    def test_matches_axis_aligned_when_yaw_zero(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            ca = rng.uniform(-3, 3, size=2)
            cb = rng.uniform(-3, 3, size=2)
            da = rng.uniform(0.2, 3.0, size=2)
            db = rng.uniform(0.2, 3.0, size=2)
            a3 = Box3D([*ca, 0.5], (da[0], da[1], 1.0), yaw=0.0)
            b3 = Box3D([*cb, 0.5], (db[0], db[1], 1.0), yaw=0.0)
            a2 = Box2D(ca[0] - da[0] / 2, ca[1] - da[1] / 2, ca[0] + da[0] / 2, ca[1] + da[1] / 2)
            b2 = Box2D(cb[0] - db[0] / 2, cb[1] - db[1] / 2, cb[0] + db[0] / 2, cb[1] + db[1] / 2)
            assert iou_bev(a3, b3) == pytest.approx(iou_axis_aligned(a2, b2), abs=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3), st.floats(0.2, 3),
           st.floats(-math.pi, math.pi), st.floats(-2, 2), st.floats(-2, 2),
           st.floats(0.2, 3), st.floats(0.2, 3), st.floats(-math.pi, math.pi))
    def test_symmetry_exact(self, ax, ay, al, aw, ayaw, bx, by, bl, bw, byaw):
        a = Box3D([ax, ay, 0.5], (al, aw, 1.0), yaw=ayaw)
        b = Box3D([bx, by, 0.5], (bl, bw, 1.0), yaw=byaw)
        assert iou_bev(a, b) == iou_bev(b, a)

    def test_random_against_monte_carlo(self):
        rng = np.random.default_rng(23)
        for seed in range(5):
            a = Box3D([*rng.uniform(-1, 1, 2), 0.5],
                      (rng.uniform(0.5, 2), rng.uniform(0.5, 2), 1.0),
                      yaw=rng.uniform(-math.pi, math.pi))
            b = Box3D([*rng.uniform(-1, 1, 2), 0.5],
                      (rng.uniform(0.5, 2), rng.uniform(0.5, 2), 1.0),
                      yaw=rng.uniform(-math.pi, math.pi))
            mc = monte_carlo_iou_bev(a, b, samples=400_000, seed=seed)
            assert iou_bev(a, b) == pytest.approx(mc, abs=3e-3)
