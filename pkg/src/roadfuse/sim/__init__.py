"""Deterministic scenario simulator: road network, vehicles, sensor emulators."""

from .road import RoadGraph, RoutePath, segment_id
from .scenario import ConfigError, ScenarioConfig, load_scenario
from .sensors import (
    CameraNoise,
    Detection2D,
    Detection3D,
    LidarNoise,
    NoiseProfile,
    RadarNoise,
    RadarPoint,
    SensorRig,
    StampedFrame,
    sense,
    sense_camera,
    sense_lidar,
    sense_radar,
    vehicle_box,
)
from .sync import SyncedBundle, Synchronizer, synchronize
from .world import CarFollowing, VehicleSpec, VehicleState, World, step_world

__all__ = [
    "CameraNoise", "CarFollowing", "ConfigError", "Detection2D", "Detection3D",
    "LidarNoise", "NoiseProfile", "RadarNoise", "RadarPoint", "RoadGraph",
    "RoutePath", "ScenarioConfig", "SensorRig", "StampedFrame", "SyncedBundle",
    "Synchronizer", "VehicleSpec", "VehicleState", "World", "load_scenario",
    "segment_id", "sense", "sense_camera", "sense_lidar", "sense_radar",
    "step_world", "synchronize", "vehicle_box",
]
