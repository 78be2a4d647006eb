"""Shared 2D/3D geometry: polygons, oriented-box IoU, rigid transforms.

All angles are radians. Undirected orientations (edge directions) live in
[0, pi); directed angles in [-pi, pi). Lengths are meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput

# Robustness knobs: sub-micron clipping, vanishing intersection areas count as empty.
CLIP_EPS = 1e-9
MIN_INTERSECTION_AREA = 1e-12


def normalize_angle(a: float) -> float:
    """Wrap a directed angle into [-pi, pi)."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def normalize_orientation(a: float) -> float:
    """Wrap an undirected orientation into [0, pi)."""
    a = math.fmod(a, math.pi)
    if a < 0.0:
        a += math.pi
    if a >= math.pi:  # fmod rounding can land exactly on pi
        a -= math.pi
    return a


def shoelace_area(vertices: np.ndarray) -> float:
    """Signed area of a closed 2D ring (positive for CCW)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def is_simple(vertices: np.ndarray) -> bool:
    """True when no two non-adjacent edges properly cross (O(n^2))."""
    n = len(vertices)
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(a1, a2, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class Polygon2:
    """Simple CCW polygon; vertices (N, 2), closed implicitly."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise DegenerateInput(f"polygon needs >= 3 2D vertices, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DegenerateInput("polygon has non-finite vertex")
        if shoelace_area(v) <= 0.0:
            raise DegenerateInput("polygon must be CCW with positive area")

    @staticmethod
    def from_points(points) -> "Polygon2":
        """Build a polygon, reversing vertex order if given CW."""
        v = np.asarray(points, dtype=np.float64)
        if v.ndim == 2 and v.shape[0] >= 3 and shoelace_area(v) < 0.0:
            v = v[::-1].copy()
        return Polygon2(v)

    def perimeter(self) -> float:
        d = np.diff(np.vstack([self.vertices, self.vertices[:1]]), axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    def edges(self):
        """Iterate (start, end) vertex pairs."""
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def contains(self, point, tol: float = 0.0) -> bool:
        """Even-odd point test; tol > 0 accepts points within tol of the boundary."""
        x, y = float(point[0]), float(point[1])
        if tol > 0.0 and self.boundary_distance((x, y)) <= tol:
            return True
        inside = False
        v = self.vertices
        n = len(v)
        j = n - 1
        for i in range(n):
            xi, yi = v[i]
            xj, yj = v[j]
            if (yi > y) != (yj > y):
                t = (y - yi) / (yj - yi)
                if x < xi + t * (xj - xi):
                    inside = not inside
            j = i
        return inside

    def boundary_distance(self, point) -> float:
        p = np.asarray(point, dtype=np.float64)
        best = math.inf
        for a, b in self.edges():
            best = min(best, point_segment_distance(p, a, b))
        return best


def polygon_area(p: Polygon2) -> float:
    """Shoelace area, strictly positive by the CCW invariant."""
    return shoelace_area(p.vertices)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.hypot(*(p - (a + t * ab))))


def convex_hull(points) -> Polygon2:
    """Andrew monotone-chain hull (CCW, collinear boundary points dropped)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateInput("convex hull needs >= 3 2D points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # dedupe exact duplicates
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
    pts = pts[keep]
    if len(pts) < 3:
        raise DegenerateInput("fewer than 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInput("all points collinear")
    return Polygon2(np.array(hull))


@dataclass(frozen=True)
class OrientedBox2:
    """Rectangle: center (x, y), half extents (l/2, w/2), yaw in [-pi, pi)."""

    center: np.ndarray
    half_extents: np.ndarray
    yaw: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(2)
        h = np.asarray(self.half_extents, dtype=np.float64).reshape(2)
        if not (h > 0).all():
            raise DegenerateInput(f"half extents must be positive, got {h}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def corners(self) -> np.ndarray:
        """4 corners, CCW."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        hx, hy = self.half_extents
        local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
        return self.center + local @ rot.T

    def area(self) -> float:
        return float(4.0 * self.half_extents[0] * self.half_extents[1])


def clip_polygon_halfplane(poly: np.ndarray, origin: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman step: keep the side where (p - origin) . normal >= -CLIP_EPS."""
    if len(poly) == 0:
        return poly
    d = (poly - origin) @ normal
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        di, dj = d[i], d[j]
        if di >= -CLIP_EPS:
            out.append(poly[i])
            if dj < -CLIP_EPS:
                t = di / (di - dj)
                out.append(poly[i] + t * (poly[j] - poly[i]))
        elif dj >= -CLIP_EPS:
            t = di / (di - dj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if out else np.empty((0, 2))


def convex_intersection_area(subject: np.ndarray, clip_box: OrientedBox2) -> float:
    """Area of a convex polygon clipped against an oriented box."""
    poly = np.asarray(subject, dtype=np.float64)
    corners = clip_box.corners()
    for i in range(4):
        a = corners[i]
        b = corners[(i + 1) % 4]
        edge = b - a
        inward = np.array([-edge[1], edge[0]])  # CCW corners -> inward normal
        poly = clip_polygon_halfplane(poly, a, inward)
        if len(poly) < 3:
            return 0.0
    area = abs(shoelace_area(poly))
    return area if area >= MIN_INTERSECTION_AREA else 0.0


def iou_xy(a: OrientedBox2, b: OrientedBox2) -> float:
    """2D IoU of oriented rectangles via convex clipping; symmetric, in [0, 1]."""
    inter = convex_intersection_area(b.corners(), a)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


# --- rigid transforms -------------------------------------------------------

def _quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(4)
    norm = float(np.linalg.norm(q))
    if not math.isfinite(norm) or norm == 0.0:
        raise DegenerateInput("zero/non-finite quaternion")
    q = q / norm
    # canonical sign so equal rotations serialize identically
    if q[0] < 0.0 or (q[0] == 0.0 and (q[1] < 0.0 or (q[1] == 0.0 and (q[2] < 0.0 or (q[2] == 0.0 and q[3] < 0.0))))):
        q = -q
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_to_yaw(q) -> float:
    """Yaw about +z, discarding roll/pitch; returns [-pi, pi)."""
    w, x, y, z = _quat_normalize(np.asarray(q, dtype=np.float64))
    return normalize_angle(math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)))


def yaw_to_quat(yaw: float) -> np.ndarray:
    h = 0.5 * yaw
    return _quat_normalize(np.array([math.cos(h), 0.0, 0.0, math.sin(h)]))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (unit quaternion, w-first) plus translation; maps points child -> parent."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = _quat_normalize(np.asarray(self.rotation, dtype=np.float64).reshape(4))
        object.__setattr__(self, "rotation", q)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise DegenerateInput("non-finite translation")
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_yaw(yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(yaw_to_quat(yaw), np.asarray(translation, dtype=np.float64))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """R @ p + T for one point (3,) or many (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation_matrix().T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: compose(self, other)(p) = self(other(p))."""
        q = quat_multiply(self.rotation, other.rotation)
        t = self.apply(other.translation)
        return RigidTransform(q, t)

    def inverse(self) -> "RigidTransform":
        qinv = np.array([self.rotation[0], -self.rotation[1], -self.rotation[2], -self.rotation[3]])
        rinv = quat_to_matrix(qinv)
        return RigidTransform(qinv, -(rinv @ self.translation))

    def yaw(self) -> float:
        return quat_to_yaw(self.rotation)
