"""Background population: vegetation density from LiDAR, road masking, and
instancing of trees/bushes plus roadside signs and poles."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDensity, SchemaViolation
from .ingest.types import AssetCatalog, LidarSweep
from .layout import RoadPlan
from .rng import derive_rng
from .taxonomy import CLASS_NAMES_20

log = logging.getLogger(__name__)

VEGETATION_LABEL_IDS = (CLASS_NAMES_20.index("bushes"), CLASS_NAMES_20.index("trees"))

KIND_TO_CATEGORY = {
    "tree": "trees",
    "bush": "bushes",
    "sign": "traffic sign",
    "pole": "pole",
}
# annotation class per background kind; poles have no native 20-class label and
# annotate as "traffic sign" (both reduce to "traffic poles" in the 13-class set)
KIND_TO_CLASS = {
    "tree": "trees",
    "bush": "bushes",
    "sign": "traffic sign",
    "pole": "traffic sign",
}


@dataclass(frozen=True)
class GridConfig:
    cell: float = 1.0
    height_band: tuple = (0.5, 15.0)   # unlabeled fallback: height above ground
    padding: float = 0.0               # extra meters around the point bounds


@dataclass(frozen=True)
class BackgroundConfig:
    min_scale: float = 0.8
    max_scale: float = 1.2
    density_coeff: float = 0.05        # instances per normalized density unit
    spacing: float = 20.0              # mean roadside gap, meters
    offset: float = 0.5                # lateral offset from the sidewalk line
    mask_margin: float = 1.0           # road dilation; >= cell diagonal / 2


@dataclass(frozen=True)
class DensityGrid:
    """Scalar weights over the ground plane; values in [0, 1] after normalization."""

    origin: np.ndarray                 # (x0, y0) of cell (0, 0)'s lower corner
    cell: float
    values: np.ndarray                 # (ny, nx), row-major over y then x

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise SchemaViolation(f"grid values must be 2D, got {v.shape}")
        if np.any(v < 0):
            raise SchemaViolation("grid values must be non-negative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(2))

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.cell

    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class BackgroundInstance:
    kind: str                          # tree | bush | sign | pole
    asset_id: str
    position: np.ndarray               # (x, y) meters
    yaw: float
    scale: float

    def __post_init__(self):
        if self.kind not in KIND_TO_CLASS:
            raise SchemaViolation(f"unknown background kind {self.kind!r}")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(2))


def vegetation_density(sweep: LidarSweep, grid_cfg: GridConfig = GridConfig()) -> DensityGrid:
    """Per-cell counts of vegetation returns, max-normalized to 1.

    Labeled sweeps count bush/tree points; unlabeled ones fall back to the
    height band (excludes ground returns and most building/sky clutter).
    An all-zero grid is allowed and flagged with a warning.
    """
    pts = sweep.points
    if sweep.has_labels:
        mask = np.isin(sweep.labels, VEGETATION_LABEL_IDS)
    else:
        lo, hi = grid_cfg.height_band
        mask = (pts[:, 2] >= lo) & (pts[:, 2] <= hi)

    cell = grid_cfg.cell
    pad = grid_cfg.padding
    x0 = math.floor((pts[:, 0].min() - pad) / cell) * cell
    y0 = math.floor((pts[:, 1].min() - pad) / cell) * cell
    nx = max(1, math.ceil((pts[:, 0].max() + pad - x0) / cell))
    ny = max(1, math.ceil((pts[:, 1].max() + pad - y0) / cell))

    values = np.zeros((ny, nx))
    sel = pts[mask]
    if len(sel):
        ix = np.clip(((sel[:, 0] - x0) / cell).astype(int), 0, nx - 1)
        iy = np.clip(((sel[:, 1] - y0) / cell).astype(int), 0, ny - 1)
        np.add.at(values, (iy, ix), 1.0)
    peak = values.max()
    if peak > 0:
        values /= peak
    else:
        log.warning("vegetation density is all zero (no qualifying points)")
    return DensityGrid(origin=np.array([x0, y0]), cell=cell, values=values)


def mask_roads(grid: DensityGrid, roads: list[RoadPlan], margin: float = 1.0) -> DensityGrid:
    """Zero every cell whose center lies on (or within margin of) a road ribbon."""
    values = grid.values.copy()
    ny, nx = values.shape
    xs = grid.origin[0] + (np.arange(nx) + 0.5) * grid.cell
    ys = grid.origin[1] + (np.arange(ny) + 0.5) * grid.cell
    cx, cy = np.meshgrid(xs, ys)
    centers = np.stack([cx.ravel(), cy.ravel()], axis=1)
    masked = np.zeros(len(centers), dtype=bool)
    for plan in roads:
        v2 = plan.mesh.vertices[:, :2]
        for tri in plan.mesh.triangles:
            masked |= _near_triangle(centers, v2[tri[0]], v2[tri[1]], v2[tri[2]], margin)
    values.ravel()[masked] = 0.0
    return DensityGrid(origin=grid.origin, cell=grid.cell, values=values)


def _near_triangle(pts: np.ndarray, a, b, c, margin: float) -> np.ndarray:
    """Points inside the triangle or within margin of its boundary (closed region)."""
    d1 = _edge_side(pts, a, b)
    d2 = _edge_side(pts, b, c)
    d3 = _edge_side(pts, c, a)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    inside = ~(neg & pos)
    if margin <= 0.0:
        near = np.zeros(len(pts), dtype=bool)
    else:
        near = (
            (_segment_distance(pts, a, b) <= margin)
            | (_segment_distance(pts, b, c) <= margin)
            | (_segment_distance(pts, c, a) <= margin)
        )
    return inside | near


def _edge_side(pts, a, b):
    return (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])


def _segment_distance(pts, a, b):
    ab = np.asarray(b) - np.asarray(a)
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = np.asarray(a) + t[:, None] * ab
    return np.hypot(*(pts - proj).T)


def sample_vegetation(grid: DensityGrid, count: int, catalog: AssetCatalog,
                      seed: int = 0, cfg: BackgroundConfig = BackgroundConfig()) -> list[BackgroundInstance]:
    """Multinomial draw over cells proportional to grid weight; jitter in-cell."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return []
    total = grid.total()
    if total <= 0.0:
        raise EmptyDensity("cannot sample vegetation from an all-zero grid")
    flora = catalog.assets_in_categories(("trees", "bushes"))
    if not flora:
        raise EmptyDensity("catalog has no tree/bush assets")
    flora = sorted(flora, key=lambda a: a.asset_id)

    rng = derive_rng(seed, "vegetation")
    probs = (grid.values / total).ravel()
    cells = rng.choice(len(probs), size=count, p=probs)
    ny, nx = grid.values.shape
    out = []
    for cell_idx in cells:
        iy, ix = divmod(int(cell_idx), nx)
        jitter = rng.uniform(0.0, 1.0, 2)
        pos = grid.origin + (np.array([ix, iy]) + jitter) * grid.cell
        asset = flora[int(rng.integers(0, len(flora)))]
        kind = "tree" if asset.category == "trees" else "bush"
        out.append(BackgroundInstance(
            kind=kind,
            asset_id=asset.asset_id,
            position=pos,
            yaw=float(rng.uniform(-math.pi, math.pi)),
            scale=float(rng.uniform(cfg.min_scale, cfg.max_scale)),
        ))
    return out


def vegetation_count(grid: DensityGrid, cfg: BackgroundConfig = BackgroundConfig()) -> int:
    """Total instances to place: density_coeff x summed normalized weight."""
    return int(round(cfg.density_coeff * grid.total()))


def place_roadside(sidewalks, catalog: AssetCatalog, cfg: BackgroundConfig = BackgroundConfig(),
                   seed: int = 0, roads: list[RoadPlan] | None = None) -> list[BackgroundInstance]:
    """Signs and poles at Exponential(mean spacing) arc-length gaps.

    Instances sit cfg.offset to the side of the sidewalk line away from the
    nearest road (left of travel direction when no roads are given) and face
    back toward it.
    """
    if cfg.spacing <= 0:
        raise ValueError("spacing must be positive")
    street_furniture = {
        "sign": sorted(catalog.assets_in_categories((KIND_TO_CATEGORY["sign"],)),
                       key=lambda a: a.asset_id),
        "pole": sorted(catalog.assets_in_categories((KIND_TO_CATEGORY["pole"],)),
                       key=lambda a: a.asset_id),
    }
    kinds = [k for k, assets in street_furniture.items() if assets]
    if not kinds:
        return []

    out = []
    for wi, line in enumerate(sidewalks):
        line = np.asarray(line, dtype=np.float64)
        seg = np.diff(line, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        total = float(seg_len.sum())
        if total <= 0.0:
            continue
        rng = derive_rng(seed, "roadside", wi)
        s = float(rng.exponential(cfg.spacing))
        while s < total:
            point, direction = _point_at_arclength(line, seg, seg_len, s)
            left = np.array([-direction[1], direction[0]])
            side = _away_from_road_side(point, left, roads)
            pos = point + side * cfg.offset
            toward_road = -side
            kind = kinds[int(rng.integers(0, len(kinds)))]
            assets = street_furniture[kind]
            asset = assets[int(rng.integers(0, len(assets)))]
            out.append(BackgroundInstance(
                kind=kind,
                asset_id=asset.asset_id,
                position=pos,
                yaw=float(math.atan2(toward_road[1], toward_road[0])),
                scale=1.0,
            ))
            s += float(rng.exponential(cfg.spacing))
    return out


def _point_at_arclength(line, seg, seg_len, s):
    acc = 0.0
    for i, L in enumerate(seg_len):
        if s <= acc + L or i == len(seg_len) - 1:
            t = (s - acc) / L if L > 0 else 0.0
            direction = seg[i] / L if L > 0 else np.array([1.0, 0.0])
            return line[i] + t * seg[i], direction
        acc += L
    raise AssertionError("unreachable")


def _away_from_road_side(point, left, roads) -> np.ndarray:
    if not roads:
        return left
    best = None
    best_d = math.inf
    for plan in roads:
        cl = plan.centerline
        for i in range(len(cl) - 1):
            a, b = cl[i], cl[i + 1]
            ab = b - a
            denom = float(ab @ ab)
            t = 0.0 if denom == 0.0 else float(np.clip((point - a) @ ab / denom, 0.0, 1.0))
            proj = a + t * ab
            d = float(np.hypot(*(point - proj)))
            if d < best_d:
                best_d = d
                best = proj
    if best is None:
        return left
    to_road = best - point
    return left if float(to_road @ left) < 0.0 else -left


def save_density_image(grid: DensityGrid, path) -> None:
    """8-bit grayscale PNG of the grid plus a `<path>.txt` origin/cell sidecar."""
    from .annotate.formats import write_png_gray8

    img = np.clip(np.rint(grid.values * 255.0), 0, 255).astype(np.uint8)
    write_png_gray8(path, img[::-1])  # north up
    sidecar = f"{path}.txt"
    with open(sidecar, "w") as f:
        f.write(f"origin_x {grid.origin[0]:.6f}\norigin_y {grid.origin[1]:.6f}\ncell {grid.cell:.6f}\n")
