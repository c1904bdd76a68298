"""Detection emulators: noisy ground-truth observations per sensor kind.

These stand in for the neural detectors so the fusion layer can be driven
at desk scale. Each emulator is a pure function of (rig, vehicle states,
noise profile, rng) and emits one stamped frame; with all noise terms zero
the output equals the analytically projected ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..geometry import (
    BehindCamera,
    Box2D,
    Box3D,
    CameraModel,
    Pose3,
    normalize_yaw,
    project_to_pixel,
)
from .world import VehicleState

# Default emission rates, Hz (camera / lidar / radar).
DEFAULT_CAMERA_RATE = 180.0
DEFAULT_LIDAR_RATE = 50.0
DEFAULT_RADAR_RATE = 200.0


@dataclass(frozen=True)
class CameraNoise:
    pixel_sigma: float = 0.0
    miss_rate: float = 0.0
    false_positive_rate: float = 0.0


@dataclass(frozen=True)
class RadarNoise:
    range_sigma: float = 0.0
    azimuth_sigma: float = 0.0
    radial_velocity_sigma: float = 0.0
    position_variance: float = 0.0   # world-position noise for filter studies


@dataclass(frozen=True)
class LidarNoise:
    center_sigma: float = 0.0
    yaw_sigma: float = 0.0
    dimension_sigma: float = 0.0
    miss_rate: float = 0.0


@dataclass(frozen=True)
class NoiseProfile:
    camera: CameraNoise = CameraNoise()
    radar: RadarNoise = RadarNoise()
    lidar: LidarNoise = LidarNoise()

    def __post_init__(self):
        for group in (self.camera, self.radar, self.lidar):
            for name, value in vars(group).items():
                if value < 0.0:
                    raise ValueError(f"noise field {name} must be >= 0")
        for rate in (self.camera.miss_rate, self.lidar.miss_rate):
            if rate > 1.0:
                raise ValueError("miss rates must be in [0, 1]")

    @staticmethod
    def zero() -> "NoiseProfile":
        return NoiseProfile()


@dataclass(frozen=True)
class RadarPoint:
    """Single return: range (m), azimuth (rad, sensor frame), radial velocity (m/s)."""

    range: float
    azimuth: float
    radial_velocity: float


@dataclass(frozen=True)
class Detection2D:
    camera_id: str
    box: Box2D
    label: str
    confidence: float


@dataclass(frozen=True)
class Detection3D:
    box: Box3D
    label: str
    confidence: float


@dataclass(frozen=True)
class StampedFrame:
    sensor_id: str
    timestamp: float
    payload: tuple


@dataclass(frozen=True)
class SensorRig:
    """One mounted sensor. `pose` maps the sensor frame to the world frame."""

    rig_id: str
    agent_id: str
    kind: str                        # camera | radar | lidar
    pose: Pose3
    rate: float
    camera: Optional[CameraModel] = None
    fov_half_angle: float = math.pi / 4      # radar
    max_range: float = 12.0                  # radar
    range_bounds: tuple = ((-12.0, 12.0), (-12.0, 12.0), (-1.0, 4.0))  # lidar
    halt_at: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("camera", "radar", "lidar"):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if self.rate <= 0.0:
            raise ValueError("sensor rate must be positive")
        if self.kind == "camera" and self.camera is None:
            raise ValueError(f"camera rig {self.rig_id} needs a CameraModel")


def vehicle_box(state: VehicleState) -> Box3D:
    """Ground-truth 3D box of a vehicle (center at half height)."""
    length, width, height = state.dimensions
    center = np.array([state.position[0], state.position[1], height / 2.0])
    return Box3D(center, (length, width, height), yaw=state.yaw)


def _sorted(vehicles: Sequence[VehicleState]) -> list[VehicleState]:
    return sorted(vehicles, key=lambda v: v.vehicle_id)


def sense_camera(rig: SensorRig, vehicles: Sequence[VehicleState],
                 noise: NoiseProfile, rng: np.random.Generator,
                 timestamp: float = 0.0) -> StampedFrame:
    """Project each visible vehicle to a jittered 2D box; add misses and
    uniform false positives."""
    cam = rig.camera
    n = noise.camera
    detections: list[Detection2D] = []
    for v in _sorted(vehicles):
        corners = vehicle_box(v).corners()
        pixels = []
        for corner in corners:
            try:
                px, _ = project_to_pixel(cam, corner)
            except BehindCamera:
                continue
            pixels.append(px)
        if not pixels:
            continue
        hull = Box2D.from_corners(pixels).clip(cam.width, cam.height)
        if hull is None or hull.area <= 0.0:
            continue
        if rng.random() < n.miss_rate:
            continue
        j = rng.normal(0.0, n.pixel_sigma, size=4) if n.pixel_sigma > 0 else np.zeros(4)
        u0, u1 = sorted((hull.u_min + j[0], hull.u_max + j[1]))
        v0, v1 = sorted((hull.v_min + j[2], hull.v_max + j[3]))
        jittered = Box2D(u0, v0, u1, v1).clip(cam.width, cam.height)
        if jittered is None or jittered.area <= 0.0:
            continue
        detections.append(Detection2D(rig.rig_id, jittered, "vehicle", 0.9))
    for _ in range(rng.poisson(n.false_positive_rate) if n.false_positive_rate > 0 else 0):
        w = rng.uniform(0.02, 0.12) * cam.width
        h = rng.uniform(0.02, 0.12) * cam.height
        cu = rng.uniform(0.0, cam.width)
        cv = rng.uniform(0.0, cam.height)
        conf = rng.uniform(0.3, 0.9)
        fp = Box2D.from_center((cu, cv), w, h).clip(cam.width, cam.height)
        if fp is not None and fp.area > 0.0:
            detections.append(Detection2D(rig.rig_id, fp, "vehicle", float(conf)))
    return StampedFrame(rig.rig_id, timestamp, tuple(detections))


def sense_radar(rig: SensorRig, vehicles: Sequence[VehicleState],
                noise: NoiseProfile, rng: np.random.Generator,
                timestamp: float = 0.0) -> StampedFrame:
    """One return per vehicle inside the field of view and range.

    Radial velocity is the vehicle velocity projected onto the
    sensor-to-target ray (positive receding).
    """
    n = noise.radar
    inv = rig.pose.inverse()
    points: list[RadarPoint] = []
    for v in _sorted(vehicles):
        center = np.array([v.position[0], v.position[1], v.dimensions[2] / 2.0])
        local = inv.transform(center)
        rng_true = float(np.linalg.norm(local))
        if rng_true <= 0.0 or rng_true > rig.max_range:
            continue
        azimuth = math.atan2(local[1], local[0])
        if abs(azimuth) > rig.fov_half_angle:
            continue
        ray = local / rng_true
        vel_world = np.array([v.speed * math.cos(v.yaw), v.speed * math.sin(v.yaw), 0.0])
        radial = float(np.dot(inv.rotate(vel_world), ray))
        r = rng_true + (rng.normal(0.0, n.range_sigma) if n.range_sigma > 0 else 0.0)
        az = azimuth + (rng.normal(0.0, n.azimuth_sigma) if n.azimuth_sigma > 0 else 0.0)
        vr = radial + (rng.normal(0.0, n.radial_velocity_sigma)
                       if n.radial_velocity_sigma > 0 else 0.0)
        if r <= 0.0:
            continue
        points.append(RadarPoint(r, az, vr))
    return StampedFrame(rig.rig_id, timestamp, tuple(points))


def sense_lidar(rig: SensorRig, vehicles: Sequence[VehicleState],
                noise: NoiseProfile, rng: np.random.Generator,
                timestamp: float = 0.0) -> StampedFrame:
    """Ground-truth 3D boxes perturbed by center/yaw/dimension noise.

    Confidence decreases with distance from the sensor.
    """
    n = noise.lidar
    inv = rig.pose.inverse()
    (x0, x1), (y0, y1), (z0, z1) = rig.range_bounds
    reach = max(abs(x0), abs(x1), abs(y0), abs(y1))
    detections: list[Detection3D] = []
    for v in _sorted(vehicles):
        box = vehicle_box(v)
        local = inv.transform(box.center)
        if not (x0 <= local[0] <= x1 and y0 <= local[1] <= y1 and z0 <= local[2] <= z1):
            continue
        if rng.random() < n.miss_rate:
            continue
        center = box.center + (rng.normal(0.0, n.center_sigma, size=3)
                               if n.center_sigma > 0 else np.zeros(3))
        yaw = box.yaw + (rng.normal(0.0, n.yaw_sigma) if n.yaw_sigma > 0 else 0.0)
        dims = np.asarray(box.dimensions) + (rng.normal(0.0, n.dimension_sigma, size=3)
                                             if n.dimension_sigma > 0 else np.zeros(3))
        dims = np.maximum(dims, 0.01)
        dist = float(np.linalg.norm(local[:2]))
        confidence = float(min(1.0, max(0.1, 1.0 - 0.5 * dist / reach)))
        detections.append(Detection3D(Box3D(center, tuple(dims), normalize_yaw(yaw)),
                                      "vehicle", confidence))
    return StampedFrame(rig.rig_id, timestamp, tuple(detections))


def sense(rig: SensorRig, vehicles: Sequence[VehicleState], noise: NoiseProfile,
          rng: np.random.Generator, timestamp: float = 0.0) -> StampedFrame:
    if rig.kind == "camera":
        return sense_camera(rig, vehicles, noise, rng, timestamp)
    if rig.kind == "radar":
        return sense_radar(rig, vehicles, noise, rng, timestamp)
    return sense_lidar(rig, vehicles, noise, rng, timestamp)
