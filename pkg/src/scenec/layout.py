"""Scene geometry from map data: building classification and extrusion, the
joint road mesh, and road-width fitting from LiDAR.

Buildings whose footprint is dominated by one perpendicular pair of edge
orientations are rectangular enough to swap for a catalog asset; everything
else keeps its extruded outline and gets a facade texture id downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import Polygon2, convex_hull, normalize_orientation, polygon_area
from .ingest.types import LidarSweep, OsmBuilding, OsmRoad
from .mesh import TriMesh, merge_meshes, triangulate_polygon
from .taxonomy import CLASS_NAMES_20

# z offsets keep coplanar ground/road/sidewalk layers label-pure when rasterized
ROAD_Z = 0.02
SIDEWALK_Z = 0.04

ROAD_LABEL_ID = CLASS_NAMES_20.index("road")

# fallback widths (meters) when LiDAR gives < min_fit_points qualifying returns
DEFAULT_ROAD_WIDTHS = {
    "motorway": 14.0,
    "trunk": 12.0,
    "primary": 10.0,
    "secondary": 9.0,
    "tertiary": 8.0,
    "residential": 6.0,
    "living_street": 5.0,
    "unclassified": 6.0,
    "service": 4.0,
}
FALLBACK_ROAD_WIDTH = 7.0


@dataclass(frozen=True)
class LayoutConfig:
    bins: int = 36                 # 5 degree orientation resolution
    perp_tol_bins: float = 1.5     # how close to pi/2 a bin pair must be
    dominance: float = 0.6         # pair weight fraction of perimeter for RectReplace
    use_area_ratio: bool = False   # optional footprint/hull area check
    rect_ratio: float = 0.85
    level_height: float = 3.0      # meters per OSM building level
    default_height: float = 10.0
    weld_tol: float = 0.5          # endpoint snap distance across ways
    min_fit_points: int = 50
    ground_band: float = 0.3       # |z| accepted as road surface when unlabeled
    max_lateral: float = 20.0      # ignore returns farther than this from the centerline
    width_bounds: tuple = (3.0, 30.0)


@dataclass(frozen=True)
class RectReplace:
    center: np.ndarray    # (2,)
    yaw: float            # [0, pi)
    extents: np.ndarray   # (2,) along (yaw, yaw + pi/2)


@dataclass(frozen=True)
class FacadeTexture:
    pass


@dataclass(frozen=True)
class BuildingPlan:
    footprint: Polygon2
    classification: RectReplace | FacadeTexture
    height: float


@dataclass(frozen=True)
class RoadPlan:
    centerline: np.ndarray
    width: float
    mesh: TriMesh


@dataclass(frozen=True)
class OrientationHistogram:
    """Edge orientations over [0, pi), weighted by edge length."""

    bins: int
    weights: np.ndarray

    def bin_width(self) -> float:
        return math.pi / self.bins


def _edge_data(p: Polygon2):
    v = p.vertices
    nxt = np.roll(v, -1, axis=0)
    d = nxt - v
    lengths = np.hypot(d[:, 0], d[:, 1])
    thetas = np.array([normalize_orientation(math.atan2(dy, dx)) for dx, dy in d])
    return lengths, thetas


def _bin_indices(thetas: np.ndarray, bins: int) -> np.ndarray:
    # tiny nudge so orientations that are exactly on a bin boundary except for
    # fp rounding land in the boundary bin
    return np.minimum((thetas / math.pi * bins + 1e-9).astype(int), bins - 1)


def orientation_histogram(p: Polygon2, bins: int = 36) -> OrientationHistogram:
    """Each edge contributes its full length to the bin holding its orientation."""
    if bins < 8:
        raise ValueError(f"need >= 8 bins, got {bins}")
    lengths, thetas = _edge_data(p)
    weights = np.zeros(bins)
    np.add.at(weights, _bin_indices(thetas, bins), lengths)
    return OrientationHistogram(bins=bins, weights=weights)


def classify_building(p: Polygon2, cfg: LayoutConfig = LayoutConfig()) -> RectReplace | FacadeTexture:
    """Detect a dominant perpendicular orientation pair; FacadeTexture otherwise.

    Bin weights are pooled over a +/-1-bin circular window so a jittered edge
    group straddling a bin boundary still counts as one orientation.
    """
    lengths, thetas = _edge_data(p)
    perimeter = float(lengths.sum())
    bins = cfg.bins
    hist = orientation_histogram(p, bins).weights
    windows = hist + np.roll(hist, 1) + np.roll(hist, -1)

    half = bins / 2.0  # pi/2 in bin units on the mod-pi circle
    best: tuple[float, int, int] | None = None
    for i in range(bins):
        if windows[i] == 0.0:
            continue
        for j in range(i + 1, bins):
            if windows[j] == 0.0:
                continue
            d = (j - i) % bins
            circ = min(d, bins - d)
            if abs(circ - half) > cfg.perp_tol_bins:
                continue
            score = windows[i] + windows[j]
            if best is None or score > best[0] + 1e-12:
                best = (score, i, j)
    if best is None or best[0] < cfg.dominance * perimeter:
        return FacadeTexture()

    if cfg.use_area_ratio:
        hull = convex_hull(p.vertices)
        if polygon_area(p) / polygon_area(hull) < cfg.rect_ratio:
            return FacadeTexture()

    _, i, j = best
    heavy = i if windows[i] >= windows[j] else j
    yaw = _window_mean_orientation(lengths, thetas, heavy, bins)
    if heavy == j and windows[i] == windows[j]:
        alt = _window_mean_orientation(lengths, thetas, i, bins)
        yaw = min(yaw, alt)

    u = np.array([math.cos(yaw), math.sin(yaw)])
    v = np.array([-math.sin(yaw), math.cos(yaw)])
    pu = p.vertices @ u
    pv = p.vertices @ v
    extents = np.array([pu.max() - pu.min(), pv.max() - pv.min()])
    center = u * (pu.max() + pu.min()) / 2.0 + v * (pv.max() + pv.min()) / 2.0
    return RectReplace(center=center, yaw=yaw, extents=extents)


def _window_mean_orientation(lengths, thetas, center_bin: int, bins: int) -> float:
    """Length-weighted circular mean of edge orientations inside a 3-bin window."""
    idx = _bin_indices(thetas, bins)
    offset = (idx - center_bin) % bins
    in_window = (offset <= 1) | (offset >= bins - 1)
    w = lengths[in_window]
    th = thetas[in_window]
    # double the angle so the mean respects the mod-pi topology
    s = float(np.sum(w * np.sin(2.0 * th)))
    c = float(np.sum(w * np.cos(2.0 * th)))
    return normalize_orientation(0.5 * math.atan2(s, c))


def building_height(b: OsmBuilding, cfg: LayoutConfig = LayoutConfig()) -> float:
    if b.levels is not None:
        return b.levels * cfg.level_height
    return cfg.default_height


def plan_building(b: OsmBuilding, cfg: LayoutConfig = LayoutConfig()) -> BuildingPlan:
    return BuildingPlan(
        footprint=b.footprint,
        classification=classify_building(b.footprint, cfg),
        height=building_height(b, cfg),
    )


def extrude_building(plan: BuildingPlan) -> TriMesh:
    """Watertight prism of the footprint: caps plus two triangles per wall."""
    fp = plan.footprint.vertices
    n = len(fp)
    h = plan.height
    cap = triangulate_polygon(plan.footprint)
    bottom = np.column_stack([fp, np.zeros(n)])
    top = np.column_stack([fp, np.full(n, h)])
    verts = np.vstack([bottom, top])

    tris: list[tuple[int, int, int]] = []
    for a, b, c in cap:
        tris.append((a, c, b))                 # bottom cap faces -z
    for a, b, c in cap:
        tris.append((n + a, n + b, n + c))     # top cap faces +z
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))             # outward walls (footprint is CCW)
        tris.append((i, n + j, n + i))
    return TriMesh(verts, np.array(tris, dtype=np.int32))


# --- roads -------------------------------------------------------------------

def _snap_endpoints(lines: list[np.ndarray], tol: float) -> list[np.ndarray]:
    """Cluster way endpoints within tol and snap each to its cluster centroid."""
    endpoints = []
    for li, line in enumerate(lines):
        endpoints.append((li, 0, line[0]))
        endpoints.append((li, len(line) - 1, line[-1]))
    k = len(endpoints)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(k):
        for b in range(a + 1, k):
            if np.hypot(*(endpoints[a][2] - endpoints[b][2])) <= tol:
                parent[find(a)] = find(b)

    clusters: dict[int, list[int]] = {}
    for a in range(k):
        clusters.setdefault(find(a), []).append(a)

    out = [line.copy() for line in lines]
    for members in clusters.values():
        if len(members) < 2:
            continue
        centroid = np.mean([endpoints[m][2] for m in members], axis=0)
        for m in members:
            li, vi, _ = endpoints[m]
            out[li][vi] = centroid
    return out


def ribbon_mesh(centerline: np.ndarray, width: float, z: float = ROAD_Z,
                miter_limit: float = 4.0) -> TriMesh:
    """Constant-width ribbon along a polyline with mitered interior joints."""
    pts = np.asarray(centerline, dtype=np.float64)
    half = width / 2.0
    n = len(pts)
    left = np.empty((n, 2))
    right = np.empty((n, 2))
    dirs = pts[1:] - pts[:-1]
    lens = np.hypot(dirs[:, 0], dirs[:, 1])
    if np.any(lens == 0.0):
        keep = np.concatenate([[True], lens > 0.0])
        pts = pts[keep]
        return ribbon_mesh(pts, width, z, miter_limit) if len(pts) >= 2 else TriMesh()
    dirs = dirs / lens[:, None]

    for i in range(n):
        if i == 0:
            normal = np.array([-dirs[0][1], dirs[0][0]])
            scale = half
        elif i == n - 1:
            normal = np.array([-dirs[-1][1], dirs[-1][0]])
            scale = half
        else:
            n1 = np.array([-dirs[i - 1][1], dirs[i - 1][0]])
            n2 = np.array([-dirs[i][1], dirs[i][0]])
            m = n1 + n2
            norm = np.hypot(*m)
            if norm < 1e-9:       # u-turn: fall back to the incoming normal
                normal = n1
                scale = half
            else:
                normal = m / norm
                cosang = float(normal @ n1)
                scale = half / max(cosang, 1.0 / miter_limit)
        left[i] = pts[i] + normal * scale
        right[i] = pts[i] - normal * scale

    verts = np.column_stack([np.vstack([left, right]), np.full(2 * n, z)])
    tris = []
    for i in range(n - 1):
        li, ri = i, n + i
        lj, rj = i + 1, n + i + 1
        tris.append((li, ri, rj))
        tris.append((li, rj, lj))
    return TriMesh(verts, np.array(tris, dtype=np.int32))


def build_road_network(roads: list[OsmRoad], widths: list[float],
                       cfg: LayoutConfig = LayoutConfig()) -> list[RoadPlan]:
    """Ribbon per way; endpoints within cfg.weld_tol snap to shared positions."""
    if len(roads) != len(widths):
        raise ValueError("one width per road required")
    snapped = _snap_endpoints([r.centerline for r in roads], cfg.weld_tol)
    plans = []
    for line, width in zip(snapped, widths):
        plans.append(RoadPlan(centerline=line, width=float(width),
                              mesh=ribbon_mesh(line, float(width))))
    return plans


def joint_road_mesh(plans: list[RoadPlan]) -> TriMesh:
    """Single welded mesh for the whole network."""
    return merge_meshes([p.mesh for p in plans])


def fit_road_width(centerline: np.ndarray, sweep: LidarSweep | None,
                   highway_class: str = "unclassified",
                   cfg: LayoutConfig = LayoutConfig()) -> float:
    """Width from the 90th percentile of |lateral offset| of qualifying returns.

    Qualifying points are road-labeled ones when the sweep is labeled, else
    unlabeled returns near the ground plane; they must project into the
    centerline's extent. Falls back to a per-class default below
    cfg.min_fit_points.
    """
    fallback = DEFAULT_ROAD_WIDTHS.get(highway_class, FALLBACK_ROAD_WIDTH)
    if sweep is None or len(sweep) == 0:
        return fallback
    if sweep.has_labels:
        candidates = sweep.points[sweep.labels == ROAD_LABEL_ID]
    else:
        candidates = sweep.points[np.abs(sweep.points[:, 2]) <= cfg.ground_band]
    if len(candidates) == 0:
        return fallback

    laterals = _corridor_laterals(candidates[:, :2], np.asarray(centerline, dtype=np.float64))
    laterals = laterals[laterals <= cfg.max_lateral]
    if len(laterals) < cfg.min_fit_points:
        return fallback
    width = 2.0 * float(np.percentile(laterals, 90.0))
    lo, hi = cfg.width_bounds
    return min(hi, max(lo, width))


def _corridor_laterals(xy: np.ndarray, line: np.ndarray) -> np.ndarray:
    """|perpendicular distance| for points whose projection lands on the polyline."""
    best = np.full(len(xy), np.inf)
    hit = np.zeros(len(xy), dtype=bool)
    for i in range(len(line) - 1):
        a, b = line[i], line[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            continue
        t = ((xy - a) @ ab) / denom
        inside = (t >= 0.0) & (t <= 1.0)
        proj = a + np.outer(np.clip(t, 0.0, 1.0), ab)
        d = np.hypot(*(xy - proj).T)
        better = inside & (d < best)
        best[better] = d[better]
        hit |= inside
    return best[hit & np.isfinite(best)]
