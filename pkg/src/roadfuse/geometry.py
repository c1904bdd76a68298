"""Rigid-frame transforms, pinhole projection, and box geometry.

Conventions used throughout the package:

* World frame: right-handed, x/y on the ground plane, z up, meters.
* Camera frame: x right, y down, z forward along the optical axis.
* Pixel frame: u right, v down, origin at the top-left image corner.
* Yaw: rotation about world z, normalized to (-pi, pi].

Everything here is an immutable value; all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ORTHONORMAL_TOL = 1e-9
_RAY_Z_EPS = 1e-9


class GeometryError(Exception):
    """Base class for geometric failure modes."""


class BehindCamera(GeometryError):
    """Point has non-positive depth along the optical axis."""


class RayParallel(GeometryError):
    """Back-projected ray does not intersect the target plane."""


class ZeroUnion(GeometryError):
    """IOU undefined: the union of the two boxes has zero area."""


def _vec(x, n: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"expected a {n}-vector, got shape {a.shape}")
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def normalize_yaw(theta: float) -> float:
    """Map an angle to (-pi, pi]; exact ties at -pi resolve to +pi."""
    r = math.fmod(theta + math.pi, 2.0 * math.pi)
    if r < 0.0:
        r += 2.0 * math.pi
    out = r - math.pi
    return math.pi if out == -math.pi else out


def rotation_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(pitch: float) -> np.ndarray:
    c, s = math.cos(pitch), math.sin(pitch)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class Pose3:
    """Rigid transform x -> rotation @ x + translation between two frames."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = _vec(self.translation, 3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.linalg.norm(r.T @ r - np.eye(3)) >= _ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))

    @staticmethod
    def identity() -> "Pose3":
        return Pose3(np.eye(3), np.zeros(3))

    @staticmethod
    def from_yaw(yaw: float, translation=(0.0, 0.0, 0.0)) -> "Pose3":
        return Pose3(rotation_z(yaw), translation)

    def compose(self, other: "Pose3") -> "Pose3":
        """Pose applying `other` first, then `self`."""
        return Pose3(self.rotation @ other.rotation,
                     self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose3":
        rt = self.rotation.T
        return Pose3(rt, -rt @ self.translation)

    def transform(self, point) -> np.ndarray:
        return self.rotation @ _vec(point, 3) + self.translation

    def rotate(self, vector) -> np.ndarray:
        return self.rotation @ _vec(vector, 3)


def transform_point(pose: Pose3, point) -> np.ndarray:
    """Apply a rigid transform to a point (total function)."""
    return pose.transform(point)


def camera_rotation(yaw: float, pitch: float) -> np.ndarray:
    """Camera-to-world rotation for a camera heading `yaw`, tilted down `pitch`.

    Columns are the world directions of the camera x (right), y (down)
    and z (forward) axes. Nadir poses (pitch = pi/2) keep image-up along
    the heading direction.
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    forward = np.array([cy * cp, sy * cp, -sp])
    up_ref = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up_ref)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([cy, sy, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.column_stack([right, down, forward])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics K, extrinsics E (world -> camera), and a
    unit-conversion matrix applied after K (identity when K is already in
    pixels)."""

    intrinsics: np.ndarray
    extrinsics: Pose3
    image_size: tuple[int, int]
    pixel_scale: np.ndarray | None = None

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=float)
        if k.shape != (3, 3):
            raise ValueError(f"intrinsics must be 3x3, got {k.shape}")
        if k[0, 0] <= 0.0 or k[1, 1] <= 0.0:
            raise ValueError("focal lengths must be positive")
        p = np.eye(3) if self.pixel_scale is None else np.asarray(self.pixel_scale, dtype=float)
        if p.shape != (3, 3):
            raise ValueError(f"pixel_scale must be 3x3, got {p.shape}")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError("image_size must be positive")
        proj = p @ k
        object.__setattr__(self, "intrinsics", _frozen(k))
        object.__setattr__(self, "pixel_scale", _frozen(p))
        object.__setattr__(self, "image_size", (int(w), int(h)))
        object.__setattr__(self, "_projection", _frozen(proj))
        object.__setattr__(self, "_projection_inv", _frozen(np.linalg.inv(proj)))
        pp = proj @ np.array([0.0, 0.0, 1.0])
        pp = pp[:2] / pp[2]
        if not (0.0 <= pp[0] <= w and 0.0 <= pp[1] <= h):
            raise ValueError(f"principal point {pp} outside image bounds {self.image_size}")
        object.__setattr__(self, "_principal_point", _frozen(pp))

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @property
    def principal_point(self) -> np.ndarray:
        return self._principal_point

    @property
    def center_world(self) -> np.ndarray:
        """Optical center in the world frame."""
        return self.extrinsics.inverse().translation

    @classmethod
    def from_mount(cls, position, yaw: float, pitch: float, focal_px: float,
                   image_size: tuple[int, int], principal_point=None,
                   pixel_scale=None) -> "CameraModel":
        """Build a camera from its mount pose (position, heading, downward tilt)."""
        w, h = image_size
        cx, cy = (w / 2.0, h / 2.0) if principal_point is None else principal_point
        k = np.array([[focal_px, 0.0, cx], [0.0, focal_px, cy], [0.0, 0.0, 1.0]])
        r_wc = camera_rotation(yaw, pitch)
        extr = Pose3(r_wc.T, -r_wc.T @ _vec(position, 3))
        return cls(k, extr, (int(w), int(h)), pixel_scale)


def project_to_pixel(cam: CameraModel, world_point) -> tuple[np.ndarray, float]:
    """Project a world point to pixel coordinates, returning ((u, v), depth).

    Raises BehindCamera when the point has non-positive depth.
    """
    cam_pt = cam.extrinsics.transform(world_point)
    depth = cam_pt[2]
    if depth <= 0.0:
        raise BehindCamera(f"depth {depth:.6f} <= 0")
    h = cam._projection @ cam_pt
    return h[:2] / h[2], float(depth)


def pixel_to_ground(cam: CameraModel, pixel, target_height: float = 0.0) -> np.ndarray:
    """Intersect the back-projected pixel ray with the plane z = target_height.

    Raises RayParallel when the (unit) ray direction has |z| < 1e-9.
    """
    u, v = float(pixel[0]), float(pixel[1])
    d_cam = cam._projection_inv @ np.array([u, v, 1.0])
    d_world = cam.extrinsics.rotation.T @ d_cam
    d_world = d_world / np.linalg.norm(d_world)
    if abs(d_world[2]) < _RAY_Z_EPS:
        raise RayParallel(f"ray z-component {d_world[2]:.3e} below threshold")
    origin = cam.center_world
    t = (target_height - origin[2]) / d_world[2]
    return origin + t * d_world


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned pixel box; degenerate (zero-area) boxes are allowed so
    clipped slivers stay representable."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self):
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ValueError(f"box corners out of order: {self}")

    @classmethod
    def from_corners(cls, points) -> "Box2D":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @classmethod
    def from_center(cls, center, width: float, height: float) -> "Box2D":
        cu, cv = float(center[0]), float(center[1])
        return cls(cu - width / 2.0, cv - height / 2.0, cu + width / 2.0, cv + height / 2.0)

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0])

    @property
    def bottom_center(self) -> np.ndarray:
        """Midpoint of the lower edge (ground contact point in v-down images)."""
        return np.array([(self.u_min + self.u_max) / 2.0, self.v_max])

    @property
    def aspect_ratio(self) -> float:
        if self.height <= 0.0:
            raise ZeroDivisionError("aspect ratio of a zero-height box")
        return self.width / self.height

    def clip(self, width: float, height: float) -> "Box2D | None":
        """Clip to [0, width] x [0, height]; None when fully outside."""
        u0 = max(self.u_min, 0.0)
        v0 = max(self.v_min, 0.0)
        u1 = min(self.u_max, float(width))
        v1 = min(self.v_max, float(height))
        if u0 > u1 or v0 > v1:
            return None
        return Box2D(u0, v0, u1, v1)


def iou_axis_aligned(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two axis-aligned boxes.

    Raises ZeroUnion when both boxes are degenerate.
    """
    iw = min(a.u_max, b.u_max) - max(a.u_min, b.u_min)
    ih = min(a.v_max, b.v_max) - max(a.v_min, b.v_min)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        raise ZeroUnion("both boxes have zero area")
    return min(max(inter / union, 0.0), 1.0)


@dataclass(frozen=True)
class Box3D:
    """Upright 3D box: world-frame center, (length, width, height), yaw about z."""

    center: np.ndarray
    dimensions: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        c = _vec(self.center, 3)
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or any(d <= 0.0 for d in dims):
            raise ValueError(f"dimensions must be three positive numbers, got {self.dimensions}")
        object.__setattr__(self, "center", _frozen(c))
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def length(self) -> float:
        return self.dimensions[0]

    @property
    def width(self) -> float:
        return self.dimensions[1]

    @property
    def height(self) -> float:
        return self.dimensions[2]

    def corners_bev(self) -> np.ndarray:
        """Ground-plane footprint corners, counterclockwise (4, 2)."""
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center[:2]

    def corners(self) -> np.ndarray:
        """Eight 3D corners, bottom face first (8, 3)."""
        bev = self.corners_bev()
        z0 = self.center[2] - self.height / 2.0
        z1 = self.center[2] + self.height / 2.0
        bottom = np.column_stack([bev, np.full(4, z0)])
        top = np.column_stack([bev, np.full(4, z1)])
        return np.vstack([bottom, top])

    def _sort_key(self) -> tuple:
        return (*self.center.tolist(), *self.dimensions, self.yaw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box3D):
            return NotImplemented
        return self._sort_key() == other._sort_key()

    def __hash__(self) -> int:
        return hash(self._sort_key())


def _polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a (possibly empty) polygon; absolute value."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))) / 2.0


def _clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex CCW subject by a convex CCW window."""
    output = [subject[i] for i in range(len(subject))]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = b - a
        points = output
        output = []
        prev = points[-1]
        prev_in = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= 0.0
        for cur in points:
            cur_in = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0]) >= 0.0
            if cur_in != prev_in:
                d1 = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0])
                d2 = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0])
                output.append(prev + (cur - prev) * (d1 / (d1 - d2)))
            if cur_in:
                output.append(cur)
            prev = cur
            prev_in = cur_in
    return np.array(output) if output else np.empty((0, 2))


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Rotated-rectangle IOU of the two footprints on the ground plane.

    Exact convex polygon clipping; symmetric by construction (operands are
    ordered canonically before clipping).
    """
    if b._sort_key() < a._sort_key():
        a, b = b, a
    pa = a.corners_bev()
    pb = b.corners_bev()
    area_a = _polygon_area(pa)
    area_b = _polygon_area(pb)
    inter = _polygon_area(_clip_convex(pa, pb))
    union = area_a + area_b - inter
    if union <= 0.0:
        raise ZeroUnion("both footprints have zero area")
    return min(max(inter / union, 0.0), 1.0)
