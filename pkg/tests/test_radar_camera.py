import math

import numpy as np
import pytest

from roadfuse.geometry import Box2D, CameraModel, Pose3
from roadfuse.fusion import (
    FusedObject,
    KalmanState,
    PotentialObject,
    RadarRoiParams,
    SingularInnovation,
    TrackState,
    TrackStatus,
    iou_match,
    kalman_predict,
    kalman_update,
    max_weight_assignment,
    radar_roi,
    track_update,
)
from roadfuse.sim.sensors import Detection2D, RadarPoint
from oracles import brute_force_max_assignment, scalar_riccati_steady_state


def forward_camera():
    return CameraModel.from_mount([0.0, 0.0, 0.0], yaw=0.0, pitch=0.0,
                                  focal_px=1000.0, image_size=(1920, 1080))


class TestRadarRoi:
    def test_scaling_arithmetic(self):
        # alpha=1.8, beta=0.2, d=3 -> S=0.8; base 100x60 -> ROI 80x48.
        cam = forward_camera()
        params = RadarRoiParams(alpha=1.8, beta=0.2, base_width=100.0, base_height=60.0)
        rois, skipped = radar_roi([RadarPoint(3.0, 0.0, 0.0)], cam, Pose3.identity(), params)
        assert skipped == 0
        assert len(rois) == 1
        assert rois[0].box.width == pytest.approx(80.0, abs=1e-9)
        assert rois[0].box.height == pytest.approx(48.0, abs=1e-9)
        assert np.allclose(rois[0].box.center, [960.0, 540.0])

    def test_far_range_floors_at_beta(self):
        cam = forward_camera()
        params = RadarRoiParams(alpha=1.8, beta=0.2, base_width=100.0, base_height=60.0)
        rois, _ = radar_roi([RadarPoint(1e6, 0.0, 0.0)], cam, Pose3.identity(), params)
        assert rois[0].box.width == pytest.approx(20.0, rel=1e-4)

    def test_behind_camera_skipped_not_fatal(self):
        cam = forward_camera()
        params = RadarRoiParams(1.8, 0.2, 100.0, 60.0)
        points = [RadarPoint(3.0, 0.0, 0.0), RadarPoint(3.0, math.pi, 0.0)]
        rois, skipped = radar_roi(points, cam, Pose3.identity(), params)
        assert len(rois) == 1
        assert skipped == 1


class TestIouMatch:
    def test_identical_box_matches(self):
        roi = Box2D(100, 100, 200, 160)
        det = Detection2D("cam", Box2D(100, 100, 200, 160), "vehicle", 0.9)
        pairs = iou_match([roi], [det])
        assert len(pairs) == 1
        assert pairs[0].iou == 1.0

    def test_gate_discards_low_correlation(self):
        roi = Box2D(0, 0, 100, 100)
        det = Detection2D("cam", Box2D(80, 80, 180, 180), "vehicle", 0.9)
        assert iou_match([roi], [det], iou_gate=0.6) == []

    def test_empty_inputs(self):
        assert iou_match([], []) == []
        assert iou_match([Box2D(0, 0, 1, 1)], []) == []

    def test_gate_monotonicity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            rois = [Box2D.from_center(rng.uniform(50, 400, 2), rng.uniform(20, 120),
                                      rng.uniform(20, 120)) for _ in range(4)]
            dets = [Detection2D("c", Box2D.from_center(rng.uniform(50, 400, 2),
                                                       rng.uniform(20, 120),
                                                       rng.uniform(20, 120)), "v", 0.9)
                    for _ in range(4)]
            low = {(p.radar_index, p.camera_index) for p in iou_match(rois, dets, 0.3)}
            high = {(p.radar_index, p.camera_index) for p in iou_match(rois, dets, 0.6)}
            assert high <= low

    def test_assignment_total_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = rng.integers(1, 5)
            m = rng.integers(1, 5)
            w = rng.uniform(0.0, 1.0, size=(n, m))
            total = sum(w[i, j] for i, j in max_weight_assignment(w))
            assert total == pytest.approx(brute_force_max_assignment(w), abs=1e-12)


def iso_state(x=(0.0, 0.0), p=1.0, q=0.01, r=0.1):
    eye = np.eye(2)
    return KalmanState(np.asarray(x, float), eye * p, eye.copy(), eye.copy(),
                       eye * q, eye * r)


class TestKalman:
    def test_predict_identity_no_process_noise(self):
        s = iso_state(x=(1.0, 2.0), p=0.5, q=0.0)
        out = kalman_predict(s)
        assert np.array_equal(out.x, s.x)
        assert np.array_equal(out.P, s.P)

    def test_predict_scalar_recursion(self):
        out = kalman_predict(iso_state(p=1.0, q=0.01))
        assert out.P[0, 0] == pytest.approx(1.01, abs=1e-15)

    def test_predict_keeps_symmetry(self):
        s = iso_state()
        p = np.array([[1.0, 0.3], [0.3, 2.0]])
        s = KalmanState(s.x, p, s.A, s.H, s.Q, s.R_obs)
        out = kalman_predict(s)
        assert np.array_equal(out.P, out.P.T)

    def test_update_scalar_gain_and_variance(self):
        # P-=1.01, R=0.1: K = 1.01/1.11 ~ 0.9099, P = (1-K)*1.01 ~ 0.0910.
        s = iso_state(x=(0.0, 0.0), p=1.01, q=0.0, r=0.1)
        out = kalman_update(s, [1.0, 0.0])
        k = 1.01 / 1.11
        assert out.x[0] == pytest.approx(k * 1.0, abs=1e-12)
        assert out.P[0, 0] == pytest.approx((1 - k) * 1.01, abs=1e-12)
        assert out.P[0, 0] == pytest.approx(0.0910, abs=1e-4)

    def test_huge_r_ignores_measurement(self):
        s = iso_state(x=(5.0, -3.0), p=1.0, r=1e12)
        out = kalman_update(s, [100.0, 100.0])
        assert np.allclose(out.x, s.x, atol=1e-9)

    def test_tiny_r_trusts_measurement(self):
        s = iso_state(x=(0.0, 0.0), p=1.0, q=0.0, r=1e-12)
        out = kalman_update(s, [4.0, 2.0])
        assert np.allclose(out.x, [4.0, 2.0], atol=1e-9)

    def test_update_never_grows_trace(self):
        rng = np.random.default_rng(12)
        s = iso_state(p=1.0, q=0.02, r=0.3)
        for _ in range(100):
            prior = kalman_predict(s)
            s = kalman_update(prior, rng.normal(size=2))
            assert np.trace(s.P) <= np.trace(prior.P) + 1e-12
            assert np.array_equal(s.P, s.P.T)
            assert np.linalg.eigvalsh(s.P).min() >= -1e-9

    def test_singular_innovation_raises(self):
        s = iso_state(p=1.0, q=0.0, r=0.0)
        bad = KalmanState(s.x, s.P, s.A, s.H, s.Q, -s.P)   # S = P + R = 0
        with pytest.raises(SingularInnovation):
            kalman_update(bad, [0.0, 0.0])

    def test_static_convergence_to_riccati_fixed_point(self):
        q, r = 1e-4, 0.01
        oracle = scalar_riccati_steady_state(q, r)
        s = iso_state(x=(0.0, 0.0), p=1.0, q=q, r=r)
        for _ in range(3000):
            s = kalman_update(kalman_predict(s), [0.0, 0.0])
        assert np.trace(s.P) / 2.0 == pytest.approx(oracle, abs=1e-6)


def potential(pos, vel=(0.0, 0.0), conf=0.9, t=0.0):
    return PotentialObject(np.asarray(pos, float), np.asarray(vel, float), conf, t)


class TestTrackUpdate:
    def test_new_tracks_withheld_from_output(self):
        tracks, fused, next_id = track_update([], [potential((1, 1)), potential((3, 3))],
                                              gate_radius=0.3, next_track_id=1)
        assert len(tracks) == 2
        assert all(t.status is TrackStatus.NEW for t in tracks)
        assert fused == []
        assert next_id == 3

    def test_second_sighting_emits(self):
        tracks, fused, nid = track_update([], [potential((1, 1))], 0.3, 1)
        tracks, fused, nid = track_update(tracks, [potential((1.01, 1.0), vel=(0.5, 0))],
                                          0.3, nid)
        assert len(fused) == 1
        assert fused[0].source == "radar-camera"
        assert fused[0].track_id == 1
        assert np.allclose(fused[0].velocity, [0.5, 0.0])
        assert tracks[0].status is TrackStatus.EXISTING

    def test_removed_after_four_consecutive_misses(self):
        tracks, _, nid = track_update([], [potential((1, 1))], 0.3, 1)
        tracks, _, nid = track_update(tracks, [potential((1, 1))], 0.3, nid)
        assert tracks[0].status is TrackStatus.EXISTING
        for miss in range(1, 4):
            tracks, fused, nid = track_update(tracks, [], 0.3, nid)
            assert len(tracks) == 1, f"track must survive miss {miss}"
            assert tracks[0].status is TrackStatus.LOST
            assert fused == []
        tracks, _, nid = track_update(tracks, [], 0.3, nid)
        assert tracks == []

    def test_lost_track_recovers(self):
        tracks, _, nid = track_update([], [potential((1, 1))], 0.3, 1)
        tracks, _, nid = track_update(tracks, [potential((1, 1))], 0.3, nid)
        tracks, _, nid = track_update(tracks, [], 0.3, nid)
        assert tracks[0].status is TrackStatus.LOST
        tracks, fused, nid = track_update(tracks, [potential((1.02, 1.0))], 0.3, nid)
        assert tracks[0].status is TrackStatus.EXISTING
        assert len(fused) == 1
        assert tracks[0].consecutive_missed == 0

    def test_gate_radius_blocks_far_potentials(self):
        tracks, _, nid = track_update([], [potential((0, 0))], 0.3, 1)
        tracks, fused, nid = track_update(tracks, [potential((5, 5))], 0.3, nid)
        # far potential opens a second track; the first coasts
        assert len(tracks) == 2
        assert fused == []
        statuses = {t.track_id: t.status for t in tracks}
        assert statuses[1] is TrackStatus.NEW  # unmatched first-sighting track
        assert statuses[2] is TrackStatus.NEW

    def test_tie_breaks_toward_lower_track_id(self):
        tracks, _, nid = track_update([], [potential((0, 0)), potential((2, 0))], 0.3, 1)
        # one potential equidistant from both tracks
        mid = potential((1.0, 0.0))
        tracks, fused, nid = track_update(tracks, [mid], gate_radius=1.0, next_track_id=nid)
        survivors = {t.track_id: t for t in tracks}
        assert survivors[1].consecutive_missed == 0   # matched (lower id wins the tie)
        assert survivors[2].consecutive_missed == 1

    def test_filter_beats_raw_observations_var_005(self):
        # Stationary target, Gaussian observation noise var 0.05, 200 frames.
        rng = np.random.default_rng(99)
        truth = np.array([1.0, 2.0])
        sigma = math.sqrt(0.05)
        tracks: list[TrackState] = []
        nid = 1
        raw_err = []
        filt_err = []
        for k in range(200):
            z = truth + rng.normal(0.0, sigma, size=2)
            tracks, fused, nid = track_update(
                tracks, [potential(z, t=k * 0.02)], 0.9, nid,
                process_variance=1e-4, observation_variance=0.05)
            if fused:
                raw_err.append(float(np.sum((z - truth) ** 2)))
                filt_err.append(float(np.sum((fused[0].position - truth) ** 2)))
        assert len(filt_err) == 199
        assert np.mean(filt_err) < np.mean(raw_err)
