"""Validated domain types produced by the ingest parsers.

All values are immutable after construction; invariants are checked in
__post_init__ and violations raise SchemaViolation naming the field.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaViolation
from ..geo import Polygon2, RigidTransform, normalize_angle
from ..taxonomy import CLASS_NAMES_20


@dataclass(frozen=True)
class GeoOrigin:
    """WGS84 anchor of the local scene frame."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise SchemaViolation(f"origin.lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise SchemaViolation(f"origin.lon out of range: {self.lon}")


@dataclass(frozen=True)
class ObjectBox:
    """One annotated 3D box at one timestamp, upright in the scene frame."""

    id: str
    category: str
    center: np.ndarray          # (3,) meters
    size: np.ndarray            # (l, w, h) meters
    yaw: float                  # radians about +z, in [-pi, pi)
    timestamp: int              # microseconds

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        s = np.asarray(self.size, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(c)):
            raise SchemaViolation(f"object {self.id}: center not finite")
        if not np.all(s > 0):
            raise SchemaViolation(f"object {self.id}: size must be positive, got {s.tolist()}")
        if self.category not in CLASS_NAMES_20:
            raise SchemaViolation(f"object {self.id}: category {self.category!r} not in taxonomy")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))
        object.__setattr__(self, "timestamp", int(self.timestamp))

    @property
    def length(self) -> float:
        return float(self.size[0])

    @property
    def width(self) -> float:
        return float(self.size[1])

    @property
    def height(self) -> float:
        return float(self.size[2])

    def pose(self) -> RigidTransform:
        """scene <- object transform (object frame at box center, x along length)."""
        return RigidTransform.from_yaw(self.yaw, self.center)


@dataclass(frozen=True)
class CameraRig:
    """Rectified pinhole camera mounted on the ego vehicle."""

    name: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: RigidTransform  # camera <- ego

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise SchemaViolation(f"camera {self.name}: focal lengths must be positive")
        if not (0 < self.cx < self.width):
            raise SchemaViolation(f"camera {self.name}: cx outside image")
        if not (0 < self.cy < self.height):
            raise SchemaViolation(f"camera {self.name}: cy outside image")

    def intrinsics(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class EgoPose:
    """scene <- ego transform at one timestamp."""

    timestamp: int
    transform: RigidTransform


@dataclass(frozen=True)
class LidarSweep:
    """Point cloud in the scene frame; labels use 20-class ids, -1 = unlabeled."""

    points: np.ndarray          # (N, 3) float64
    labels: np.ndarray          # (N,) int16, -1 where unlabeled
    timestamp: int = 0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] == 0:
            raise SchemaViolation(f"lidar points must be non-empty (N, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise SchemaViolation("lidar points must be finite")
        lab = np.asarray(self.labels, dtype=np.int16).reshape(p.shape[0])
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "labels", lab)

    @property
    def has_labels(self) -> bool:
        return bool(np.any(self.labels >= 0))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class OsmBuilding:
    footprint: Polygon2
    levels: int | None = None
    osm_id: str = ""


@dataclass(frozen=True)
class OsmRoad:
    centerline: np.ndarray      # (N, 2) local meters
    highway_class: str = "unclassified"
    tagged_width: float | None = None
    osm_id: str = ""

    def __post_init__(self):
        c = np.asarray(self.centerline, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 2:
            raise SchemaViolation(f"road centerline needs >= 2 points, got {c.shape}")
        object.__setattr__(self, "centerline", c)


@dataclass(frozen=True)
class OsmExtract:
    buildings: tuple[OsmBuilding, ...] = ()
    roads: tuple[OsmRoad, ...] = ()
    sidewalks: tuple[np.ndarray, ...] = ()


@dataclass(frozen=True)
class AssetEntry:
    asset_id: str
    category: str
    bbox_dims: np.ndarray       # (l, w, h) meters
    mesh_ref: str = ""

    def __post_init__(self):
        d = np.asarray(self.bbox_dims, dtype=np.float64).reshape(3)
        if not np.all(d > 0):
            raise SchemaViolation(f"asset {self.asset_id}: bbox_dims must be positive")
        object.__setattr__(self, "bbox_dims", d)


@dataclass(frozen=True)
class MaterialEntry:
    material_id: str
    surface_role: str

    SURFACE_ROLES = ("facade", "road", "sidewalk", "terrain")

    def __post_init__(self):
        if self.surface_role not in self.SURFACE_ROLES:
            raise SchemaViolation(
                f"material {self.material_id}: surface_role {self.surface_role!r} "
                f"not in {self.SURFACE_ROLES}"
            )


@dataclass(frozen=True)
class AssetCatalog:
    assets: tuple[AssetEntry, ...]
    materials: tuple[MaterialEntry, ...]
    hdris: tuple[str, ...]

    def __post_init__(self):
        ids = [a.asset_id for a in self.assets]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaViolation(f"duplicate asset_id(s): {dupes}")
        roles_present = {m.surface_role for m in self.materials}
        missing = [r for r in MaterialEntry.SURFACE_ROLES if r not in roles_present]
        if missing:
            raise SchemaViolation(f"no material for surface role(s): {missing}")
        if not self.hdris:
            raise SchemaViolation("catalog needs at least one hdri id")

    def by_id(self, asset_id: str) -> AssetEntry:
        for a in self.assets:
            if a.asset_id == asset_id:
                return a
        raise KeyError(asset_id)

    def assets_in_categories(self, categories) -> list[AssetEntry]:
        cats = set(categories)
        return [a for a in self.assets if a.category in cats]

    def materials_for_role(self, role: str) -> list[MaterialEntry]:
        return [m for m in self.materials if m.surface_role == role]


@dataclass(frozen=True)
class SceneRecord:
    """One real-world scene: geo anchor, trajectory, boxes, rigs, LiDAR."""

    scene_id: str
    origin: GeoOrigin
    ego_poses: tuple[EgoPose, ...]
    cameras: tuple[CameraRig, ...]
    objects: tuple[ObjectBox, ...]
    lidar_files: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.ego_poses:
            raise SchemaViolation("scene has no ego poses")
        if not self.cameras:
            raise SchemaViolation("scene has no cameras")
        # sorted by timestamp then id: the deterministic instance-id order downstream
        objs = tuple(sorted(self.objects, key=lambda o: (o.timestamp, o.id)))
        poses = tuple(sorted(self.ego_poses, key=lambda p: p.timestamp))
        object.__setattr__(self, "objects", objs)
        object.__setattr__(self, "ego_poses", poses)

    def objects_at_first_timestamp(self) -> list[ObjectBox]:
        """Earliest box per object id, in (timestamp, id) order."""
        seen: dict[str, ObjectBox] = {}
        for o in self.objects:
            if o.id not in seen:
                seen[o.id] = o
        return sorted(seen.values(), key=lambda o: (o.timestamp, o.id))
