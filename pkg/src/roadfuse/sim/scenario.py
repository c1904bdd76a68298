"""Scenario configuration: YAML schema, validation, and typed accessors.

A scenario file fully determines a run: field and road layout, vehicles,
sensor rigs grouped into agents, noise, fusion parameters, and scheduling
knobs. The packaged `default` scenario approximates an 8m x 10m tabletop
field with a ring road, a central crossroad, and a diagonal overpass ramp;
`schedule` is the same layout at reduced sensor rates for routing studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..geometry import CameraModel, Pose3, camera_rotation, rotation_y, rotation_z
from .road import RoadGraph, segment_id
from .sensors import (
    CameraNoise,
    LidarNoise,
    NoiseProfile,
    RadarNoise,
    SensorRig,
)
from .world import CarFollowing, VehicleSpec

SCENARIO_SCHEMA = "scenario/1"


class ConfigError(Exception):
    """Scenario file violates the schema; message names the offending field."""


@dataclass(frozen=True)
class RadarCameraParams:
    alpha: float = 2.4
    beta: float = 0.05
    base_width: float = 120.0
    base_height: float = 60.0
    iou_gate: float = 0.6
    gate_radius: float = 0.3
    process_variance: float = 1e-4
    observation_variance: float = 1e-2


@dataclass(frozen=True)
class LidarCameraParams:
    iou_gate: float = 0.7
    center_weight: float = 0.7
    yaw_sweep: float = math.radians(15.0)
    yaw_step: float = math.radians(0.5)
    ratio_tolerance: float = 0.02
    keep_unmatched_3d: bool = False


@dataclass(frozen=True)
class SchedulingParams:
    window: float = 1.0
    replan_interval: float = 1.0
    congestion_weight: float = 0.5
    speed_floor: float = 0.05
    snap_distance: float = 0.3


@dataclass(frozen=True)
class MetricsParams:
    cell_size: float = 0.25
    eval_gate: float = 0.3


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    region: np.ndarray                  # (N, 2) polygon over the field
    owned_segments: tuple[str, ...]     # explicit ownership, may be empty
    sync_tolerance: float | None
    rigs: tuple[SensorRig, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    field_size: tuple[float, float]     # width (x), length (y), m
    tick: float
    duration: float
    rng_seed: int
    car_following: CarFollowing
    graph: RoadGraph
    intersections: dict[str, int]       # node -> public number
    intersection_radius: float
    trip_endpoints: tuple[str, ...]
    vehicles: tuple[VehicleSpec, ...]
    vehicle_start_offsets: dict[str, float]
    noise: NoiseProfile
    radar_camera: RadarCameraParams
    lidar_camera: LidarCameraParams
    scheduling: SchedulingParams
    metrics: MetricsParams
    agents: tuple[AgentConfig, ...]


def _require(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing required field '{path}.{key}'" if path else
                          f"missing required field '{key}'")
    return mapping[key]


def _number(value, path, positive=False, non_negative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{path}' must be a number, got {value!r}")
    v = float(value)
    if positive and v <= 0.0:
        raise ConfigError(f"field '{path}' must be > 0, got {v}")
    if non_negative and v < 0.0:
        raise ConfigError(f"field '{path}' must be >= 0, got {v}")
    return v


def _sensor_pose(position, yaw: float, pitch: float, kind: str) -> Pose3:
    """Mount pose (sensor frame -> world). Cameras use optical axes; radar
    and lidar use x-forward, z-up axes."""
    if kind == "camera":
        r = camera_rotation(yaw, pitch)
    else:
        r = rotation_z(yaw) @ rotation_y(pitch)
    return Pose3(r, position)


def _load_rig(raw: dict, agent_id: str, path: str) -> SensorRig:
    rig_id = str(_require(raw, "id", path))
    kind = str(_require(raw, "kind", path))
    if kind not in ("camera", "radar", "lidar"):
        raise ConfigError(f"field '{path}.kind' must be camera/radar/lidar, got {kind!r}")
    rate = _number(_require(raw, "rate", path), f"{path}.rate", positive=True)
    position = _require(raw, "position", path)
    if not (isinstance(position, list) and len(position) == 3):
        raise ConfigError(f"field '{path}.position' must be [x, y, z]")
    yaw = math.radians(_number(raw.get("yaw_deg", 0.0), f"{path}.yaw_deg"))
    pitch = math.radians(_number(raw.get("pitch_deg", 0.0), f"{path}.pitch_deg"))
    pose = _sensor_pose([float(c) for c in position], yaw, pitch, kind)
    halt_at = raw.get("halt_at")
    if halt_at is not None:
        halt_at = _number(halt_at, f"{path}.halt_at", non_negative=True)

    camera = None
    fov_half = math.pi / 4
    max_range = 12.0
    bounds = ((-12.0, 12.0), (-12.0, 12.0), (-1.0, 4.0))
    if kind == "camera":
        image = raw.get("image", [1920, 1080])
        if not (isinstance(image, list) and len(image) == 2):
            raise ConfigError(f"field '{path}.image' must be [width, height]")
        focal = _number(_require(raw, "focal_px", path), f"{path}.focal_px", positive=True)
        camera = CameraModel.from_mount([float(c) for c in position], yaw, pitch,
                                        focal, (int(image[0]), int(image[1])))
    elif kind == "radar":
        fov_half = math.radians(_number(raw.get("fov_half_angle_deg", 45.0),
                                        f"{path}.fov_half_angle_deg", positive=True))
        max_range = _number(raw.get("max_range", 12.0), f"{path}.max_range", positive=True)
    else:
        rb = raw.get("range_bounds", [[-12, 12], [-12, 12], [-1, 4]])
        try:
            bounds = tuple((float(lo), float(hi)) for lo, hi in rb)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field '{path}.range_bounds' malformed: {exc}") from exc
        if len(bounds) != 3 or any(lo >= hi for lo, hi in bounds):
            raise ConfigError(f"field '{path}.range_bounds' must be three [lo, hi] pairs")
    return SensorRig(rig_id=rig_id, agent_id=agent_id, kind=kind, pose=pose, rate=rate,
                     camera=camera, fov_half_angle=fov_half, max_range=max_range,
                     range_bounds=bounds, halt_at=halt_at)


def _load_noise(raw: dict) -> NoiseProfile:
    cam = raw.get("camera", {})
    rad = raw.get("radar", {})
    lid = raw.get("lidar", {})
    try:
        return NoiseProfile(
            camera=CameraNoise(
                pixel_sigma=_number(cam.get("pixel_sigma", 0.0), "noise.camera.pixel_sigma", non_negative=True),
                miss_rate=_number(cam.get("miss_rate", 0.0), "noise.camera.miss_rate", non_negative=True),
                false_positive_rate=_number(cam.get("false_positive_rate", 0.0),
                                            "noise.camera.false_positive_rate", non_negative=True)),
            radar=RadarNoise(
                range_sigma=_number(rad.get("range_sigma", 0.0), "noise.radar.range_sigma", non_negative=True),
                azimuth_sigma=_number(rad.get("azimuth_sigma", 0.0), "noise.radar.azimuth_sigma", non_negative=True),
                radial_velocity_sigma=_number(rad.get("radial_velocity_sigma", 0.0),
                                              "noise.radar.radial_velocity_sigma", non_negative=True),
                position_variance=_number(rad.get("position_variance", 0.0),
                                          "noise.radar.position_variance", non_negative=True)),
            lidar=LidarNoise(
                center_sigma=_number(lid.get("center_sigma", 0.0), "noise.lidar.center_sigma", non_negative=True),
                yaw_sigma=_number(lid.get("yaw_sigma", 0.0), "noise.lidar.yaw_sigma", non_negative=True),
                dimension_sigma=_number(lid.get("dimension_sigma", 0.0),
                                        "noise.lidar.dimension_sigma", non_negative=True),
                miss_rate=_number(lid.get("miss_rate", 0.0), "noise.lidar.miss_rate", non_negative=True)),
        )
    except ValueError as exc:
        raise ConfigError(f"noise profile invalid: {exc}") from exc


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Load a scenario from a file path or a packaged name ('default', 'schedule')."""
    text, name = _read_source(source)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario {name}: not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"scenario {name}: top level must be a mapping")
    if raw.get("schema") != SCENARIO_SCHEMA:
        raise ConfigError(f"scenario {name}: unknown schema {raw.get('schema')!r}, "
                          f"expected {SCENARIO_SCHEMA!r}")

    fld = _require(raw, "field", "")
    width = _number(_require(fld, "width", "field"), "field.width", positive=True)
    length = _number(_require(fld, "length", "field"), "field.length", positive=True)
    tick = _number(_require(raw, "tick", ""), "tick", positive=True)
    duration = _number(_require(raw, "duration", ""), "duration", positive=True)
    seed = _require(raw, "rng_seed", "")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("field 'rng_seed' must be an integer")

    cf_raw = raw.get("car_following", {})
    following = CarFollowing(
        min_gap=_number(cf_raw.get("min_gap", 0.06), "car_following.min_gap", positive=True),
        headway=_number(cf_raw.get("headway", 0.35), "car_following.headway", positive=True))

    road_raw = _require(raw, "road", "")
    nodes_raw = _require(road_raw, "nodes", "road")
    nodes = {}
    for node_id, xy in nodes_raw.items():
        if not (isinstance(xy, list) and len(xy) == 2):
            raise ConfigError(f"field 'road.nodes.{node_id}' must be [x, y]")
        nodes[str(node_id)] = (float(xy[0]), float(xy[1]))
    edges = []
    for i, e in enumerate(_require(road_raw, "edges", "road")):
        if not (isinstance(e, list) and len(e) == 3):
            raise ConfigError(f"field 'road.edges[{i}]' must be [from, to, speed_limit]")
        a, b, limit = str(e[0]), str(e[1]), _number(e[2], f"road.edges[{i}].speed_limit",
                                                    positive=True)
        edges.append((a, b, limit))
        edges.append((b, a, limit))
    for i, e in enumerate(road_raw.get("oneway_edges", [])):
        if not (isinstance(e, list) and len(e) == 3):
            raise ConfigError(f"field 'road.oneway_edges[{i}]' must be [from, to, speed_limit]")
        edges.append((str(e[0]), str(e[1]),
                      _number(e[2], f"road.oneway_edges[{i}].speed_limit", positive=True)))
    try:
        graph = RoadGraph(nodes, edges)
    except ValueError as exc:
        raise ConfigError(f"road graph invalid: {exc}") from exc

    inter_raw = raw.get("intersections", {})
    intersections = {}
    for node_id, number in inter_raw.items():
        if str(node_id) not in graph.nodes:
            raise ConfigError(f"intersections: unknown node {node_id!r}")
        intersections[str(node_id)] = int(number)
    radius = _number(raw.get("intersection_radius", 0.4), "intersection_radius", positive=True)

    endpoints = tuple(str(n) for n in raw.get("trip_endpoints", []))
    for n in endpoints:
        if n not in graph.nodes:
            raise ConfigError(f"trip_endpoints: unknown node {n!r}")

    vehicles = []
    offsets = {}
    for i, v in enumerate(_require(raw, "vehicles", "")):
        path = f"vehicles[{i}]"
        vid = str(_require(v, "id", path))
        dims = _require(v, "dims", path)
        if not (isinstance(dims, list) and len(dims) == 3):
            raise ConfigError(f"field '{path}.dims' must be [length, width, height]")
        dims = tuple(_number(d, f"{path}.dims", positive=True) for d in dims)
        speed = _number(_require(v, "speed", path), f"{path}.speed", non_negative=True)
        route = [str(n) for n in _require(v, "route", path)]
        try:
            graph.validate_route(route)
        except ValueError as exc:
            raise ConfigError(f"field '{path}.route' invalid: {exc}") from exc
        vehicles.append(VehicleSpec(vid, dims, tuple(route), speed))
        offsets[vid] = _number(v.get("start_offset", 0.0), f"{path}.start_offset",
                               non_negative=True)
    if len({v.vehicle_id for v in vehicles}) != len(vehicles):
        raise ConfigError("vehicles: duplicate ids")

    noise = _load_noise(raw.get("noise", {}))

    fus = raw.get("fusion", {})
    rc_raw = fus.get("radar_camera", {})
    base_roi = rc_raw.get("base_roi", [120.0, 60.0])
    if not (isinstance(base_roi, list) and len(base_roi) == 2):
        raise ConfigError("field 'fusion.radar_camera.base_roi' must be [width, height]")
    obs_var = rc_raw.get("observation_variance")
    if obs_var is None:
        obs_var = max(noise.radar.position_variance, 1e-4)
    radar_camera = RadarCameraParams(
        alpha=_number(rc_raw.get("alpha", 2.4), "fusion.radar_camera.alpha"),
        beta=_number(rc_raw.get("beta", 0.05), "fusion.radar_camera.beta"),
        base_width=_number(base_roi[0], "fusion.radar_camera.base_roi[0]", positive=True),
        base_height=_number(base_roi[1], "fusion.radar_camera.base_roi[1]", positive=True),
        iou_gate=_number(rc_raw.get("iou_gate", 0.6), "fusion.radar_camera.iou_gate"),
        gate_radius=_number(rc_raw.get("gate_radius", 0.3), "fusion.radar_camera.gate_radius",
                            positive=True),
        process_variance=_number(rc_raw.get("process_variance", 1e-4),
                                 "fusion.radar_camera.process_variance", positive=True),
        observation_variance=_number(obs_var, "fusion.radar_camera.observation_variance",
                                     positive=True))
    lc_raw = fus.get("lidar_camera", {})
    lidar_camera = LidarCameraParams(
        iou_gate=_number(lc_raw.get("iou_gate", 0.7), "fusion.lidar_camera.iou_gate"),
        center_weight=_number(lc_raw.get("center_weight", 0.7),
                              "fusion.lidar_camera.center_weight", non_negative=True),
        yaw_sweep=math.radians(_number(lc_raw.get("yaw_sweep_deg", 15.0),
                                       "fusion.lidar_camera.yaw_sweep_deg", positive=True)),
        yaw_step=math.radians(_number(lc_raw.get("yaw_step_deg", 0.5),
                                      "fusion.lidar_camera.yaw_step_deg", positive=True)),
        ratio_tolerance=_number(lc_raw.get("ratio_tolerance", 0.02),
                                "fusion.lidar_camera.ratio_tolerance", positive=True),
        keep_unmatched_3d=bool(lc_raw.get("keep_unmatched_3d", False)))

    sch_raw = raw.get("scheduling", {})
    scheduling = SchedulingParams(
        window=_number(sch_raw.get("window", 1.0), "scheduling.window", positive=True),
        replan_interval=_number(sch_raw.get("replan_interval", 1.0),
                                "scheduling.replan_interval", positive=True),
        congestion_weight=_number(sch_raw.get("congestion_weight", 0.5),
                                  "scheduling.congestion_weight", non_negative=True),
        speed_floor=_number(sch_raw.get("speed_floor", 0.05), "scheduling.speed_floor",
                            positive=True),
        snap_distance=_number(sch_raw.get("snap_distance", 0.3), "scheduling.snap_distance",
                              positive=True))

    m_raw = raw.get("metrics", {})
    metrics = MetricsParams(
        cell_size=_number(m_raw.get("cell_size", 0.25), "metrics.cell_size", positive=True),
        eval_gate=_number(m_raw.get("eval_gate", 0.3), "metrics.eval_gate", positive=True))

    agents = []
    seen_rigs = set()
    for i, a in enumerate(raw.get("agents", [])):
        path = f"agents[{i}]"
        agent_id = str(_require(a, "id", path))
        region_raw = _require(a, "region", path)
        region = np.asarray(region_raw, dtype=float)
        if region.ndim != 2 or region.shape[1] != 2 or len(region) < 3:
            raise ConfigError(f"field '{path}.region' must be a polygon [[x, y], ...]")
        owned = []
        for seg in a.get("owned_segments", []):
            parts = str(seg).split("|")
            if len(parts) != 2:
                raise ConfigError(f"field '{path}.owned_segments' entries must be 'A|B'")
            canon = segment_id(parts[0], parts[1])
            if canon not in graph.segment_ids():
                raise ConfigError(f"field '{path}.owned_segments': unknown segment {seg!r}")
            owned.append(canon)
        tol = a.get("sync_tolerance")
        if tol is not None:
            tol = _number(tol, f"{path}.sync_tolerance", positive=True)
        rigs = []
        for j, r in enumerate(a.get("rigs", [])):
            rig = _load_rig(r, agent_id, f"{path}.rigs[{j}]")
            if rig.rig_id in seen_rigs:
                raise ConfigError(f"duplicate rig id {rig.rig_id!r}")
            seen_rigs.add(rig.rig_id)
            rigs.append(rig)
        agents.append(AgentConfig(agent_id, region, tuple(owned), tol, tuple(rigs)))
    if len({a.agent_id for a in agents}) != len(agents):
        raise ConfigError("agents: duplicate ids")

    return ScenarioConfig(
        name=str(raw.get("name", name)),
        field_size=(width, length),
        tick=tick,
        duration=duration,
        rng_seed=int(seed),
        car_following=following,
        graph=graph,
        intersections=intersections,
        intersection_radius=radius,
        trip_endpoints=endpoints,
        vehicles=tuple(vehicles),
        vehicle_start_offsets=offsets,
        noise=noise,
        radar_camera=radar_camera,
        lidar_camera=lidar_camera,
        scheduling=scheduling,
        metrics=metrics,
        agents=tuple(agents),
    )


def _read_source(source: str | Path) -> tuple[str, str]:
    if isinstance(source, str) and "/" not in source and not source.endswith(".yaml"):
        res = resources.files("roadfuse.data").joinpath(f"{source}_scenario.yaml")
        if not res.is_file():
            raise ConfigError(f"unknown packaged scenario {source!r}")
        return res.read_text(encoding="utf-8"), source
    p = Path(source)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {p}")
    return p.read_text(encoding="utf-8"), p.name
