"""Directed road network: nodes, lane edges, routes, and arc-length geometry."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Edge:
    """Directed lane from node `a` to node `b` with a speed limit in m/s."""

    a: str
    b: str
    length: float
    speed_limit: float


def segment_id(a: str, b: str) -> str:
    """Undirected segment key shared by the two directed edges of a lane."""
    return f"{a}|{b}" if a <= b else f"{b}|{a}"


class RoadGraph:
    def __init__(self, nodes: dict[str, tuple[float, float]],
                 edges: list[tuple[str, str, float]]):
        """`edges` entries are (from, to, speed_limit); lengths are Euclidean."""
        self.nodes: dict[str, np.ndarray] = {
            name: np.asarray(xy, dtype=float) for name, xy in nodes.items()
        }
        self.edges: dict[tuple[str, str], Edge] = {}
        self.out_edges: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b, limit in edges:
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
            if a == b:
                raise ValueError(f"self-loop edge at {a}")
            length = float(np.linalg.norm(self.nodes[b] - self.nodes[a]))
            if length <= 0.0:
                raise ValueError(f"zero-length edge ({a}, {b})")
            if limit <= 0.0:
                raise ValueError(f"non-positive speed limit on ({a}, {b})")
            self.edges[(a, b)] = Edge(a, b, length, float(limit))
            self.out_edges[a].append(b)
        for succ in self.out_edges.values():
            succ.sort()

    def edge(self, a: str, b: str) -> Edge:
        return self.edges[(a, b)]

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges

    def segment_ids(self) -> list[str]:
        return sorted({segment_id(a, b) for a, b in self.edges})

    def segment_midpoint(self, seg: str) -> np.ndarray:
        a, b = seg.split("|")
        return (self.nodes[a] + self.nodes[b]) / 2.0

    def segment_endpoints(self, seg: str) -> tuple[np.ndarray, np.ndarray]:
        a, b = seg.split("|")
        return self.nodes[a], self.nodes[b]

    def validate_route(self, route: list[str]) -> None:
        if len(route) < 2:
            raise ValueError(f"route needs at least two nodes, got {route}")
        for a, b in zip(route, route[1:]):
            if not self.has_edge(a, b):
                raise ValueError(f"route hop ({a}, {b}) is not an edge")

    def nearest_segment(self, point, max_distance: float) -> tuple[str, float] | None:
        """Closest undirected segment within `max_distance`, or None.

        Ties break toward the lexicographically smaller segment id.
        """
        p = np.asarray(point, dtype=float)
        best: tuple[float, str] | None = None
        for seg in self.segment_ids():
            a, b = self.segment_endpoints(seg)
            d = _point_segment_distance(p, a, b)
            if d <= max_distance and (best is None or (d, seg) < best):
                best = (d, seg)
        if best is None:
            return None
        return best[1], best[0]


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


class RoutePath:
    """A route through the graph with cumulative arc-length lookup."""

    def __init__(self, graph: RoadGraph, nodes: list[str]):
        graph.validate_route(nodes)
        self.graph = graph
        self.nodes = list(nodes)
        self.cumulative = [0.0]
        for a, b in zip(nodes, nodes[1:]):
            self.cumulative.append(self.cumulative[-1] + graph.edge(a, b).length)
        self.total = self.cumulative[-1]

    def locate(self, s: float) -> tuple[np.ndarray, float, tuple[str, str], float]:
        """Position, heading yaw, edge, and offset on that edge at arc length s."""
        s = min(max(s, 0.0), self.total)
        i = bisect.bisect_right(self.cumulative, s) - 1
        i = min(i, len(self.nodes) - 2)
        a, b = self.nodes[i], self.nodes[i + 1]
        pa = self.graph.nodes[a]
        pb = self.graph.nodes[b]
        offset = s - self.cumulative[i]
        length = self.graph.edge(a, b).length
        frac = offset / length
        pos = pa + (pb - pa) * frac
        heading = math.atan2(pb[1] - pa[1], pb[0] - pa[0])
        return pos, heading, (a, b), offset

    def edge_index_of(self, s: float) -> int:
        i = bisect.bisect_right(self.cumulative, min(max(s, 0.0), self.total)) - 1
        return min(i, len(self.nodes) - 2)
