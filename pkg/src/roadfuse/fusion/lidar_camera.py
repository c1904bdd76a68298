"""Lidar-camera result-level fusion: per-frame box matching and merging.

Each 3D detection is matched against the 2D detections of every camera
that can see it, visiting cameras in ascending distance from the box.
The winner in the nearest gate-passing camera is marked as the match;
winners in farther cameras for an already-matched box are masked (removed
from the pool, since they are duplicate views of the same object). After
the traversal, 2D and 3D boxes never matched are discarded, which is what
removes camera-only false positives from the output.

Merging fuses each matched pair into a single world-frame box: a weighted
center between the lidar box and the camera back-projection, and a yaw
refined so the reprojected aspect ratio approaches the matched 2D boxes'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..geometry import (
    BehindCamera,
    Box2D,
    Box3D,
    CameraModel,
    GeometryError,
    RayParallel,
    ZeroUnion,
    iou_axis_aligned,
    normalize_yaw,
    pixel_to_ground,
    project_to_pixel,
)
from ..sim.sensors import Detection2D, Detection3D


class FullyBehind(GeometryError):
    """All eight box corners have non-positive depth for this camera."""


def project_box_to_image(box: Box3D, cam: CameraModel) -> Box2D | None:
    """Axis-aligned hull of the visible projected corners, clipped to the image.

    Returns None when the box is in front of the camera but projects
    entirely outside the frame. Raises FullyBehind when no corner has
    positive depth.
    """
    pixels = []
    for corner in box.corners():
        try:
            px, _ = project_to_pixel(cam, corner)
        except BehindCamera:
            continue
        pixels.append(px)
    if not pixels:
        raise FullyBehind("no box corner projects in front of the camera")
    return Box2D.from_corners(pixels).clip(cam.width, cam.height)


@dataclass
class MatchLedger:
    """Bookkeeping of one matching pass.

    `iou_records` holds every IOU actually computed, as tuples
    (d3_index, camera_id, d2_index, iou).
    """

    matched_3d: set[int] = field(default_factory=set)
    matched_2d: set[tuple[str, int]] = field(default_factory=set)
    masked_2d: set[tuple[str, int]] = field(default_factory=set)
    iou_records: list[tuple[int, str, int, float]] = field(default_factory=list)
    pairs: dict[int, tuple[str, int]] = field(default_factory=dict)
    contributions: dict[int, list[tuple[str, int]]] = field(default_factory=dict)


@dataclass(frozen=True)
class MergedBox:
    box: Box3D
    contributing: tuple[tuple[str, int], ...]   # (camera_id, detection index)
    confidence: float
    match_status: str                           # matched | unmatched-3d-kept


def _traversal_order(d3: Sequence[Detection3D]) -> list[int]:
    # High-confidence boxes claim 2D detections first; ties keep input order.
    return sorted(range(len(d3)), key=lambda i: (-d3[i].confidence, i))


def box_match(d3: Sequence[Detection3D], d2: Mapping[str, Sequence[Detection2D]],
              cams: Mapping[str, CameraModel], iou_gate: float = 0.7) -> MatchLedger:
    """Distance-ordered greedy matching of 3D boxes against per-camera 2D boxes.

    3D boxes are traversed in descending confidence order. For each, cameras
    are visited nearest first; within a camera, the highest-IOU unmatched,
    unmasked 2D box wins if it passes the gate. The first winning camera
    marks the pair; farther winning cameras mask their 2D box.
    """
    ledger = MatchLedger()
    for i in _traversal_order(d3):
        det3 = d3[i]
        order = sorted(cams, key=lambda cid: (
            float(np.linalg.norm(det3.box.center - cams[cid].center_world)), cid))
        for cam_id in order:
            try:
                projected = project_box_to_image(det3.box, cams[cam_id])
            except FullyBehind:
                continue
            if projected is None or projected.area <= 0.0:
                continue
            best: tuple[float, float, int] | None = None   # (iou, conf, index)
            for k, det2 in enumerate(d2.get(cam_id, ())):
                key = (cam_id, k)
                if key in ledger.matched_2d or key in ledger.masked_2d:
                    continue
                try:
                    v = iou_axis_aligned(projected, det2.box)
                except ZeroUnion:
                    v = 0.0
                ledger.iou_records.append((i, cam_id, k, v))
                if best is None or (v, det2.confidence, -k) > (best[0], best[1], -best[2]):
                    best = (v, det2.confidence, k)
            if best is None or best[0] < iou_gate:
                continue
            key = (cam_id, best[2])
            if i not in ledger.matched_3d:
                ledger.matched_3d.add(i)
                ledger.matched_2d.add(key)
                ledger.pairs[i] = key
                ledger.contributions.setdefault(i, []).append(key)
            else:
                ledger.masked_2d.add(key)
                ledger.contributions.setdefault(i, []).append(key)
    return ledger


def _aspect_target(contribs: list[tuple[str, int]],
                   d2: Mapping[str, Sequence[Detection2D]]) -> float | None:
    """Confidence-weighted mean aspect ratio of the contributing 2D boxes."""
    num = 0.0
    den = 0.0
    for cam_id, k in contribs:
        det = d2[cam_id][k]
        if det.box.height <= 0.0 or det.box.area <= 0.0:
            continue
        num += det.confidence * det.box.aspect_ratio
        den += det.confidence
    return num / den if den > 0.0 else None


def _refine_yaw(box: Box3D, cam: CameraModel, target_ratio: float,
                sweep: float, step: float, tolerance: float) -> float:
    """Pick the yaw within +-sweep whose reprojected aspect ratio is nearest
    the target; candidates are visited by increasing |offset| so an already
    acceptable yaw is kept."""
    n = int(round(sweep / step))
    offsets = [0.0]
    for k in range(1, n + 1):
        offsets.extend((k * step, -k * step))
    best_yaw = box.yaw
    best_err = math.inf
    for off in offsets:
        cand = Box3D(box.center, box.dimensions, normalize_yaw(box.yaw + off))
        try:
            projected = project_box_to_image(cand, cam)
        except FullyBehind:
            continue
        if projected is None or projected.height <= 0.0:
            continue
        err = abs(projected.aspect_ratio - target_ratio)
        if err < best_err:
            best_err = err
            best_yaw = cand.yaw
        if err <= tolerance:
            break
    return best_yaw


def merge_boxes(ledger: MatchLedger, d3: Sequence[Detection3D],
                d2: Mapping[str, Sequence[Detection2D]],
                cams: Mapping[str, CameraModel], center_weight: float = 0.7,
                yaw_sweep: float = math.radians(15.0),
                yaw_step: float = math.radians(0.5),
                ratio_tolerance: float = 0.02,
                keep_unmatched_3d: bool = False) -> list[MergedBox]:
    """Fuse matched pairs into world-frame boxes.

    Center: weight * lidar + (1 - weight) * camera back-projection of the
    2D box center at the lidar box height. Yaw: aspect-ratio sweep against
    the confidence-weighted mean ratio of the contributing 2D boxes.
    Confidence: mean of all contributing detections (3D and 2D).
    """
    merged: list[MergedBox] = []
    for i in _traversal_order(d3):
        det3 = d3[i]
        if i not in ledger.matched_3d:
            if keep_unmatched_3d:
                merged.append(MergedBox(det3.box, (), det3.confidence,
                                        "unmatched-3d-kept"))
            continue
        cam_id, k = ledger.pairs[i]
        det2 = d2[cam_id][k]
        cam = cams[cam_id]
        center = det3.box.center.copy()
        try:
            ground = pixel_to_ground(cam, det2.box.center, float(det3.box.center[2]))
            center = center_weight * det3.box.center + (1.0 - center_weight) * ground
        except RayParallel:
            pass   # keep the lidar center when the view ray is degenerate
        fused = Box3D(center, det3.box.dimensions, det3.box.yaw)
        contribs = ledger.contributions.get(i, [])
        target = _aspect_target(contribs, d2)
        if target is not None:
            yaw = _refine_yaw(fused, cam, target, yaw_sweep, yaw_step, ratio_tolerance)
            fused = Box3D(fused.center, fused.dimensions, yaw)
        confs = [det3.confidence] + [d2[c][j].confidence for c, j in contribs]
        merged.append(MergedBox(fused, tuple(contribs),
                                float(sum(confs) / len(confs)), "matched"))
    return merged


class LidarCameraFusion:
    """Per-agent per-bundle fusion: pure function of the bundle contents."""

    def __init__(self, cameras: dict[str, CameraModel], iou_gate: float = 0.7,
                 center_weight: float = 0.7, yaw_sweep: float = math.radians(15.0),
                 yaw_step: float = math.radians(0.5), ratio_tolerance: float = 0.02,
                 keep_unmatched_3d: bool = False):
        self.cameras = cameras
        self.iou_gate = iou_gate
        self.center_weight = center_weight
        self.yaw_sweep = yaw_sweep
        self.yaw_step = yaw_step
        self.ratio_tolerance = ratio_tolerance
        self.keep_unmatched_3d = keep_unmatched_3d

    def process(self, d3: Sequence[Detection3D],
                d2: Mapping[str, Sequence[Detection2D]]) -> list[MergedBox]:
        ledger = box_match(d3, d2, self.cameras, self.iou_gate)
        return merge_boxes(ledger, d3, d2, self.cameras, self.center_weight,
                           self.yaw_sweep, self.yaw_step, self.ratio_tolerance,
                           self.keep_unmatched_3d)
