"""Asset-to-box matching by the quality-of-fit score, and camera pose sampling.

The score for a (query box, asset) pair is the footprint IoU of the co-located
boxes times the smaller z-extent, after the asset is uniformly scaled so its
largest dimension matches the query's. It is meters-valued on purpose: only
the ranking is consumed, so it is left unnormalized.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CameraBelowGround, NoAssetForCategory, NoCameraRig, SchemaViolation
from .geo import OrientedBox2, RigidTransform, iou_xy
from .ingest.types import AssetCatalog, CameraRig, ObjectBox, SceneRecord
from .rng import derive_rng
from .taxonomy import CLASS_NAMES_20, VEHICLE_CLASSES

log = logging.getLogger(__name__)

# which catalog categories may stand in for each annotated category
DEFAULT_COMPATIBILITY = {name: (name,) for name in CLASS_NAMES_20}

MIN_CAMERA_HEIGHT = 0.2
MIN_MOUNT_HEIGHT = 1.2


def load_compatibility(path) -> dict[str, tuple[str, ...]]:
    """JSON map: annotated category -> list of acceptable asset categories."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise SchemaViolation("compatibility file must be a JSON object")
    table = dict(DEFAULT_COMPATIBILITY)
    for key, value in doc.items():
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise SchemaViolation(f"compatibility[{key!r}] must be a list of category names")
        table[key] = tuple(value)
    return table


@dataclass(frozen=True)
class AssetMatch:
    object_id: str
    asset_id: str
    scale: float
    score: float
    rank: int  # 1 = best score

    def __post_init__(self):
        if not self.scale > 0:
            raise SchemaViolation(f"match {self.object_id}: scale must be positive")
        if self.score < 0:
            raise SchemaViolation(f"match {self.object_id}: negative score")
        if self.rank < 1:
            raise SchemaViolation(f"match {self.object_id}: rank must be >= 1")


@dataclass(frozen=True)
class EgoClone:
    timestamp: int


@dataclass(frozen=True)
class VehicleMount:
    object_id: str


@dataclass(frozen=True)
class CameraSample:
    pose: RigidTransform          # camera <- scene
    rig: CameraRig
    source: EgoClone | VehicleMount

    def __post_init__(self):
        if self.position()[2] <= MIN_CAMERA_HEIGHT:
            raise CameraBelowGround(
                f"camera at z = {self.position()[2]:.3f} m (source {self.source})"
            )

    def position(self) -> np.ndarray:
        """Camera origin in the scene frame."""
        return self.pose.inverse().translation


def fit_scale(query: ObjectBox, asset_dims) -> float:
    """Uniform factor so the asset's largest dimension matches the query's."""
    dims = np.asarray(asset_dims, dtype=np.float64).reshape(3)
    if not np.all(dims > 0):
        raise SchemaViolation(f"asset dims must be positive, got {dims.tolist()}")
    return float(np.max(query.size) / np.max(dims))


def iou3d(query: ObjectBox, scaled_dims) -> float:
    """Footprint IoU times the smaller height, boxes co-centered/co-oriented.

    The caller pre-scales the asset dims (see fit_scale); units are meters.
    """
    dims = np.asarray(scaled_dims, dtype=np.float64).reshape(3)
    a = OrientedBox2((0.0, 0.0), (query.length / 2.0, query.width / 2.0), 0.0)
    b = OrientedBox2((0.0, 0.0), (dims[0] / 2.0, dims[1] / 2.0), 0.0)
    return iou_xy(a, b) * min(query.height, float(dims[2]))


def match_assets(objects, catalog: AssetCatalog, k: int = 1, seed: int = 0,
                 compatibility: dict | None = None) -> list[AssetMatch]:
    """Best-scoring asset per box, or a seeded uniform draw from the top-k.

    Deterministic given (objects, catalog, k, seed): candidate order is
    (score desc, asset_id asc) and each object's draw uses its own RNG stream.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    compat = compatibility if compatibility is not None else DEFAULT_COMPATIBILITY
    matches = []
    for obj in objects:
        allowed = compat.get(obj.category, (obj.category,))
        candidates = catalog.assets_in_categories(allowed)
        if not candidates:
            raise NoAssetForCategory(
                f"no catalog asset for category {obj.category!r} (allowed: {list(allowed)})"
            )
        scored = []
        for asset in candidates:
            scale = fit_scale(obj, asset.bbox_dims)
            score = iou3d(obj, asset.bbox_dims * scale)
            scored.append((score, asset.asset_id, scale))
        scored.sort(key=lambda t: (-t[0], t[1]))
        top = scored[: min(k, len(scored))]
        if len(top) == 1:
            pick = 0
        else:
            pick = int(derive_rng(seed, "match", obj.id).integers(0, len(top)))
        score, asset_id, scale = top[pick]
        matches.append(AssetMatch(
            object_id=obj.id, asset_id=asset_id, scale=scale, score=score, rank=pick + 1,
        ))
    return matches


def sample_cameras(scene: SceneRecord, matches, n: int = 20, seed: int = 0) -> list[CameraSample]:
    """Ego-clone first, then mounts on distinct vehicles, then more ego poses.

    The ego rig's mount transform is re-expressed relative to each vehicle's
    box center, with the camera clamped to at least MIN_MOUNT_HEIGHT above
    ground.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not scene.cameras:
        raise NoCameraRig(f"scene {scene.scene_id!r} has no camera rig")
    rig = scene.cameras[0]
    mount = rig.extrinsics.inverse()  # ego <- camera

    samples = [_ego_clone(scene, 0, rig, mount)]

    matched_ids = {m.object_id for m in matches}
    vehicles = [
        o for o in scene.objects_at_first_timestamp()
        if o.category in VEHICLE_CLASSES and (not matched_ids or o.id in matched_ids)
    ]
    rng = derive_rng(seed, "cameras")
    order = rng.permutation(len(vehicles))
    for idx in order:
        if len(samples) >= n:
            break
        samples.append(_vehicle_mount(vehicles[int(idx)], rig, mount))

    pose_idx = 1
    while len(samples) < n:
        samples.append(_ego_clone(scene, pose_idx % len(scene.ego_poses), rig, mount))
        pose_idx += 1
    return samples


def _ego_clone(scene: SceneRecord, pose_index: int, rig: CameraRig,
               mount: RigidTransform) -> CameraSample:
    ego = scene.ego_poses[pose_index]
    scene_from_cam = ego.transform.compose(mount)
    return CameraSample(
        pose=scene_from_cam.inverse(),
        rig=rig,
        source=EgoClone(timestamp=ego.timestamp),
    )


def _vehicle_mount(box: ObjectBox, rig: CameraRig, mount: RigidTransform) -> CameraSample:
    scene_from_cam = box.pose().compose(mount)
    t = scene_from_cam.translation
    if t[2] < MIN_MOUNT_HEIGHT:
        scene_from_cam = RigidTransform(
            scene_from_cam.rotation, np.array([t[0], t[1], MIN_MOUNT_HEIGHT])
        )
    return CameraSample(
        pose=scene_from_cam.inverse(),
        rig=rig,
        source=VehicleMount(object_id=box.id),
    )
