"""Kinematic vehicle world: route following with simple gap-keeping.

The stepper is deterministic: vehicles update synchronously from a snapshot
of the previous tick, in sorted-id order, with no randomness. A vehicle
never advances past the previous position of its leader minus the minimum
gap, so vehicles cannot pass through each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .road import RoadGraph, RoutePath


@dataclass(frozen=True)
class CarFollowing:
    min_gap: float = 0.06     # bumper-to-bumper floor, m
    headway: float = 0.35     # distance below which vehicles slow, m


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: str
    dimensions: tuple[float, float, float]   # length, width, height, m
    route: tuple[str, ...]
    speed: float                              # nominal cruise speed, m/s


@dataclass(frozen=True)
class VehicleState:
    """Ground-truth snapshot of one vehicle at one instant."""

    vehicle_id: str
    position: np.ndarray      # (2,) m, world frame
    yaw: float                # heading, rad
    speed: float              # actual speed this tick, m/s
    dimensions: tuple[float, float, float]
    timestamp: float


@dataclass
class _VehicleRun:
    spec: VehicleSpec
    path: RoutePath
    s: float = 0.0
    speed: float = 0.0
    pending_route: Optional[list[str]] = None
    trips_completed: int = 0


# Called when a vehicle reaches the end of its route: (vehicle_id, end_node,
# trips_completed) -> continuation route starting at end_node, or None to
# respawn at the start of the current route.
RouteProvider = Callable[[str, str, int], Optional[list[str]]]


class World:
    def __init__(self, graph: RoadGraph, vehicles: list[VehicleSpec],
                 following: CarFollowing = CarFollowing(),
                 route_provider: RouteProvider | None = None):
        self.graph = graph
        self.following = following
        self.route_provider = route_provider
        self.time = 0.0
        self.route_exhausted_count = 0
        self._vehicles: dict[str, _VehicleRun] = {}
        for spec in vehicles:
            path = RoutePath(graph, list(spec.route))
            self._vehicles[spec.vehicle_id] = _VehicleRun(spec=spec, path=path)
        if len(self._vehicles) != len(vehicles):
            raise ValueError("duplicate vehicle ids")

    def vehicle_ids(self) -> list[str]:
        return sorted(self._vehicles)

    def states(self) -> list[VehicleState]:
        out = []
        for vid in self.vehicle_ids():
            run = self._vehicles[vid]
            pos, yaw, _, _ = run.path.locate(run.s)
            out.append(VehicleState(vid, pos, yaw, run.speed, run.spec.dimensions, self.time))
        return out

    def replace_route(self, vehicle_id: str, route: list[str], s: float = 0.0) -> None:
        run = self._vehicles[vehicle_id]
        run.path = RoutePath(self.graph, route)
        run.s = min(max(s, 0.0), run.path.total)

    def current_edge(self, vehicle_id: str) -> tuple[tuple[str, str], float]:
        run = self._vehicles[vehicle_id]
        _, _, edge, offset = run.path.locate(run.s)
        return edge, offset

    def set_pending_route(self, vehicle_id: str, route: list[str] | None) -> None:
        self._vehicles[vehicle_id].pending_route = list(route) if route else None

    def step(self, dt: float) -> None:
        """Advance every vehicle by one tick of length dt."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        # Snapshot previous positions per edge for leader lookup.
        on_edge: dict[tuple[str, str], list[tuple[float, float, str]]] = {}
        for vid in self.vehicle_ids():
            run = self._vehicles[vid]
            _, _, edge, offset = run.path.locate(run.s)
            on_edge.setdefault(edge, []).append((offset, run.spec.dimensions[0] / 2.0, vid))

        min_gap = self.following.min_gap
        headway = self.following.headway

        for vid in self.vehicle_ids():
            run = self._vehicles[vid]
            pos_gap = self._leader_gap(run, on_edge, vid)
            _, _, edge, _ = run.path.locate(run.s)
            desired = min(run.spec.speed, self.graph.edge(*edge).speed_limit)
            if pos_gap <= min_gap:
                v = 0.0
            elif pos_gap < headway:
                v = desired * (pos_gap - min_gap) / (headway - min_gap)
            else:
                v = desired
            ds = min(v * dt, max(0.0, pos_gap - min_gap))
            run.s += ds
            run.speed = ds / dt
            self._handle_route_end(run)
        self.time += dt

    def _leader_gap(self, run: _VehicleRun, on_edge, vid: str) -> float:
        """Bumper gap to the nearest vehicle ahead along this route, or inf."""
        lookahead = self.following.headway + run.spec.dimensions[0]
        half_len = run.spec.dimensions[0] / 2.0
        _, _, _, my_offset = run.path.locate(run.s)
        idx = run.path.edge_index_of(run.s)
        dist_to_edge_start = -my_offset
        gap = math.inf
        for i in range(idx, len(run.path.nodes) - 1):
            a, b = run.path.nodes[i], run.path.nodes[i + 1]
            for offset, other_half, other_id in on_edge.get((a, b), ()):
                if other_id == vid:
                    continue
                center_dist = dist_to_edge_start + offset
                if i == idx and offset <= my_offset:
                    continue
                gap = min(gap, center_dist - other_half - half_len)
            dist_to_edge_start += self.graph.edge(a, b).length
            if dist_to_edge_start - my_offset > lookahead:
                break
        return gap

    def _handle_route_end(self, run: _VehicleRun) -> None:
        while run.s >= run.path.total:
            overshoot = run.s - run.path.total
            end_node = run.path.nodes[-1]
            run.trips_completed += 1
            continuation = run.pending_route
            run.pending_route = None
            if continuation is None and self.route_provider is not None:
                continuation = self.route_provider(run.spec.vehicle_id, end_node,
                                                   run.trips_completed)
            if continuation:
                if continuation[0] != end_node:
                    raise ValueError(
                        f"continuation for {run.spec.vehicle_id} must start at {end_node}")
                run.path = RoutePath(self.graph, continuation)
            else:
                # No scheduler-issued continuation: respawn at route start.
                self.route_exhausted_count += 1
            run.s = overshoot


def step_world(world: World, dt: float) -> World:
    """Advance the world by one tick (in place) and return it."""
    world.step(dt)
    return world
