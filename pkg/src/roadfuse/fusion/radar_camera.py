"""Radar-camera result-level fusion: ROI matching plus filtered tracking.

Pipeline per synchronized bundle:

1. Radar returns are projected through radar -> world -> pixel and expanded
   into image ROIs sized by distance compensation (scale = alpha/d + beta).
2. ROIs are matched one-to-one against camera detections on an IOU matrix
   (maximum-weight assignment); pairs below the IOU gate are discarded.
3. Surviving pairs become world-frame potential objects (camera box contact
   point projected to the ground; radar supplies the velocity vector).
4. A per-agent track table associates potentials to tracks by nearest
   neighbor inside a gate radius and runs an identity-matrix Kalman filter
   per track. First-sighting tracks are withheld from output; a track
   missing for more than three consecutive frames is removed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..geometry import (
    BehindCamera,
    Box2D,
    CameraModel,
    Pose3,
    RayParallel,
    ZeroUnion,
    iou_axis_aligned,
    pixel_to_ground,
    project_to_pixel,
)
from ..sim.sensors import Detection2D, RadarPoint

MAX_CONSECUTIVE_MISSES = 3


class SingularInnovation(Exception):
    """Innovation covariance is not invertible (misconfigured R)."""


@dataclass(frozen=True)
class RadarRoiParams:
    """Distance compensation for radar ROIs: scale = alpha / d + beta applied
    to a predefined base size (pixels)."""

    alpha: float
    beta: float
    base_width: float
    base_height: float


@dataclass(frozen=True)
class RadarRoi:
    """A radar return expanded to an image ROI, with its world-frame context."""

    box: Box2D
    point: RadarPoint
    world_position: np.ndarray    # (2,) reconstructed return position
    world_ray: np.ndarray         # (2,) unit sensor->target direction
    distance: float               # boresight distance used for scaling


def radar_point_world(point: RadarPoint, radar_pose: Pose3) -> np.ndarray:
    """Reconstruct the 3D return position in the world frame (sensor z = 0)."""
    local = np.array([point.range * math.cos(point.azimuth),
                      point.range * math.sin(point.azimuth), 0.0])
    return radar_pose.transform(local)


def radar_roi(points: Sequence[RadarPoint], cam: CameraModel, radar_pose: Pose3,
              params: RadarRoiParams) -> tuple[list[RadarRoi], int]:
    """Expand radar returns into image ROIs; returns (rois, behind_camera_count).

    The scaling distance d is the boresight component of the return (range
    projected on the sensor x axis), floored to avoid blowup near the sensor.
    """
    rois: list[RadarRoi] = []
    skipped = 0
    for point in points:
        world = radar_point_world(point, radar_pose)
        try:
            pixel, _ = project_to_pixel(cam, world)
        except BehindCamera:
            skipped += 1
            continue
        d = max(point.range * math.cos(point.azimuth), 1e-6)
        scale = params.alpha / d + params.beta
        if scale <= 0.0:
            skipped += 1
            continue
        box = Box2D.from_center(pixel, params.base_width * scale,
                                params.base_height * scale)
        clipped = box.clip(cam.width, cam.height)
        if clipped is None or clipped.area <= 0.0:
            skipped += 1
            continue
        ray = world[:2] - radar_pose.translation[:2]
        n = np.linalg.norm(ray)
        ray = ray / n if n > 0 else np.array([1.0, 0.0])
        rois.append(RadarRoi(clipped, point, world[:2], ray, d))
    return rois, skipped


@dataclass(frozen=True)
class MatchedPair:
    radar_index: int
    camera_index: int
    iou: float
    radar_center: np.ndarray
    camera_center: np.ndarray


def max_weight_assignment(weights: np.ndarray) -> list[tuple[int, int]]:
    """Optimal one-to-one assignment maximizing total weight (Kuhn-Munkres)."""
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols)]


def iou_match(radar_rois: Sequence[Box2D], camera_dets: Sequence[Detection2D],
              iou_gate: float = 0.6) -> list[MatchedPair]:
    """Maximum-weight one-to-one assignment on the ROI/detection IOU matrix.

    Pairs with IOU below the gate (or exactly zero, forbidden edges) are
    dropped. Output is sorted by descending IOU, then indices.
    """
    if not radar_rois or not camera_dets:
        return []
    iou = np.zeros((len(radar_rois), len(camera_dets)))
    for i, roi in enumerate(radar_rois):
        for j, det in enumerate(camera_dets):
            try:
                iou[i, j] = iou_axis_aligned(roi, det.box)
            except ZeroUnion:
                iou[i, j] = 0.0
    pairs = []
    for i, j in max_weight_assignment(iou):
        if iou[i, j] < iou_gate or iou[i, j] <= 0.0:
            continue
        pairs.append(MatchedPair(int(i), int(j), float(iou[i, j]),
                                 radar_rois[i].center, camera_dets[j].box.center))
    pairs.sort(key=lambda p: (-p.iou, p.radar_index, p.camera_index))
    return pairs


@dataclass(frozen=True)
class KalmanState:
    """Position filter with identity transition and observation matrices."""

    x: np.ndarray        # (2,) state estimate, world m
    P: np.ndarray        # (2, 2) state covariance
    A: np.ndarray        # transition matrix (identity here)
    H: np.ndarray        # observation matrix (identity here)
    Q: np.ndarray        # transition covariance
    R_obs: np.ndarray    # observation covariance

    @classmethod
    def initial(cls, position, process_variance: float,
                observation_variance: float) -> "KalmanState":
        eye = np.eye(2)
        return cls(x=np.asarray(position, float).copy(), P=eye * observation_variance,
                   A=eye.copy(), H=eye.copy(), Q=eye * process_variance,
                   R_obs=eye * observation_variance)


def kalman_predict(s: KalmanState) -> KalmanState:
    """Time update: x = A x, P = A P A^T + Q (P kept symmetric)."""
    x = s.A @ s.x
    p = s.A @ s.P @ s.A.T + s.Q
    p = (p + p.T) / 2.0
    return replace(s, x=x, P=p)


def kalman_update(s: KalmanState, z) -> KalmanState:
    """Measurement update with gain K = P H^T (H P H^T + R)^-1."""
    z = np.asarray(z, dtype=float)
    innovation_cov = s.H @ s.P @ s.H.T + s.R_obs
    try:
        gain = np.linalg.solve(innovation_cov.T, (s.P @ s.H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation(f"innovation covariance singular: {exc}") from exc
    x = s.x + gain @ (z - s.H @ s.x)
    p = (np.eye(len(s.x)) - gain @ s.H) @ s.P
    p = (p + p.T) / 2.0
    return replace(s, x=x, P=p)


class TrackStatus(enum.Enum):
    NEW = "new"
    EXISTING = "existing"
    LOST = "lost"


@dataclass
class TrackState:
    track_id: int
    kalman: KalmanState
    status: TrackStatus
    consecutive_missed: int
    last_velocity: np.ndarray     # (2,) m/s, carried from radar measurements
    confidence: float
    updated_at: float


@dataclass(frozen=True)
class PotentialObject:
    """A matched radar/camera pair lifted to the world frame."""

    position: np.ndarray          # (2,) m
    velocity: np.ndarray          # (2,) m/s
    confidence: float
    timestamp: float


@dataclass(frozen=True)
class FusedObject:
    position: np.ndarray
    velocity: np.ndarray
    source: str
    confidence: float
    timestamp: float
    track_id: int


def track_update(tracks: list[TrackState], potentials: Sequence[PotentialObject],
                 gate_radius: float, next_track_id: int,
                 process_variance: float = 1e-4, observation_variance: float = 1e-2,
                 ) -> tuple[list[TrackState], list[FusedObject], int]:
    """One tracking frame: associate, filter, and manage lifecycle.

    Association is nearest-neighbor within `gate_radius`; ties break toward
    the smaller distance, then the lower track id. Matched tracks become
    (or stay) existing and are emitted; unmatched potentials open new
    tracks that are withheld this frame; unmatched tracks coast on the
    prediction alone and are removed after more than three consecutive
    misses. Returns (tracks, emitted objects, next free track id).
    """
    candidates = []
    for ti, track in enumerate(tracks):
        for pi, pot in enumerate(potentials):
            d = float(np.linalg.norm(track.kalman.x - pot.position))
            if d <= gate_radius:
                candidates.append((d, track.track_id, pi, ti))
    candidates.sort()

    matched_tracks: dict[int, int] = {}
    used_potentials: set[int] = set()
    for d, _tid, pi, ti in candidates:
        if ti in matched_tracks or pi in used_potentials:
            continue
        matched_tracks[ti] = pi
        used_potentials.add(pi)

    out_tracks: list[TrackState] = []
    fused: list[FusedObject] = []
    for ti, track in enumerate(tracks):
        if ti in matched_tracks:
            pot = potentials[matched_tracks[ti]]
            k = kalman_update(kalman_predict(track.kalman), pot.position)
            track.kalman = k
            track.status = TrackStatus.EXISTING
            track.consecutive_missed = 0
            track.last_velocity = pot.velocity.copy()
            track.confidence = pot.confidence
            track.updated_at = pot.timestamp
            out_tracks.append(track)
            fused.append(FusedObject(k.x.copy(), track.last_velocity.copy(),
                                     "radar-camera", track.confidence,
                                     pot.timestamp, track.track_id))
        else:
            track.consecutive_missed += 1
            if track.consecutive_missed > MAX_CONSECUTIVE_MISSES:
                continue   # removed: not detected for over 3 consecutive frames
            track.kalman = kalman_predict(track.kalman)
            if track.status is TrackStatus.EXISTING:
                track.status = TrackStatus.LOST
            out_tracks.append(track)

    for pi, pot in enumerate(potentials):
        if pi in used_potentials:
            continue
        out_tracks.append(TrackState(
            track_id=next_track_id,
            kalman=KalmanState.initial(pot.position, process_variance,
                                       observation_variance),
            status=TrackStatus.NEW,
            consecutive_missed=0,
            last_velocity=pot.velocity.copy(),
            confidence=pot.confidence,
            updated_at=pot.timestamp))
        next_track_id += 1
    return out_tracks, fused, next_track_id


class RadarCameraFusion:
    """Per-agent fusion instance: consumes synchronized bundles in timestamp
    order and emits world-frame fused objects."""

    def __init__(self, cameras: dict[str, CameraModel], radar_pose: Pose3,
                 roi_params: RadarRoiParams, iou_gate: float = 0.6,
                 gate_radius: float = 0.3, process_variance: float = 1e-4,
                 observation_variance: float = 1e-2):
        self.cameras = cameras
        self.radar_pose = radar_pose
        self.roi_params = roi_params
        self.iou_gate = iou_gate
        self.gate_radius = gate_radius
        self.process_variance = process_variance
        self.observation_variance = observation_variance
        self.tracks: list[TrackState] = []
        self.next_track_id = 1
        self.behind_camera_skips = 0

    def process(self, timestamp: float, radar_points: Sequence[RadarPoint],
                camera_dets: dict[str, Sequence[Detection2D]]) -> list[FusedObject]:
        potentials: list[PotentialObject] = []
        for cam_id in sorted(camera_dets):
            cam = self.cameras[cam_id]
            dets = list(camera_dets[cam_id])
            rois, skipped = radar_roi(radar_points, cam, self.radar_pose, self.roi_params)
            self.behind_camera_skips += skipped
            pairs = iou_match([r.box for r in rois], dets, self.iou_gate)
            for pair in pairs:
                roi = rois[pair.radar_index]
                det = dets[pair.camera_index]
                try:
                    ground = pixel_to_ground(cam, det.box.bottom_center, 0.0)
                    position = ground[:2]
                except RayParallel:
                    position = roi.world_position
                velocity = roi.point.radial_velocity * roi.world_ray
                potentials.append(PotentialObject(position, velocity,
                                                  det.confidence, timestamp))
        self.tracks, fused, self.next_track_id = track_update(
            self.tracks, potentials, self.gate_radius, self.next_track_id,
            self.process_variance, self.observation_variance)
        return fused
