"""Reader/writer for the normalized scene-record schema ("trove-in/1").

One neutral JSON layout decouples the pipeline from vendor dataset formats;
see docs/formats.md for the field-by-field description. The nuScenes importer
in .nuscenes emits this schema.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .. import INPUT_SCHEMA
from ..errors import EmptyScene, MissingFile, SchemaViolation
from ..geo import RigidTransform, quat_to_yaw
from .types import CameraRig, EgoPose, GeoOrigin, ObjectBox, SceneRecord

log = logging.getLogger(__name__)


def _require(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise SchemaViolation(f"field {path} must be an object")
    if key not in d:
        raise SchemaViolation(f"missing field {path}.{key}")
    return d[key]


def _vec(value, n: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64).reshape(n)
    except (TypeError, ValueError):
        raise SchemaViolation(f"field {path} must be a {n}-vector") from None
    if not np.all(np.isfinite(arr)):
        raise SchemaViolation(f"field {path} must be finite")
    return arr


def _transform(d: dict, path: str) -> RigidTransform:
    if not isinstance(d, dict):
        raise SchemaViolation(f"field {path} must be an object")
    rot = _vec(_require(d, "rotation", path), 4, f"{path}.rotation")
    trans = _vec(_require(d, "translation", path), 3, f"{path}.translation")
    return RigidTransform(rot, trans)


def parse_scene_record(dataset_root, scene_id: str) -> SceneRecord:
    """Load `<dataset_root>/<scene_id>/scene.json` into a validated SceneRecord."""
    scene_dir = Path(dataset_root) / scene_id
    path = scene_dir / "scene.json"
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"scene.json is not valid JSON: {e}") from e
    return parse_scene_dict(doc, scene_dir=scene_dir)


def parse_scene_dict(doc: dict, scene_dir: Path | None = None) -> SceneRecord:
    # boundary contract: arbitrary JSON values come out as typed errors, not crashes
    try:
        return _parse_scene_dict(doc, scene_dir)
    except (SchemaViolation, EmptyScene):
        raise
    except (TypeError, ValueError, AttributeError, KeyError, IndexError) as e:
        raise SchemaViolation(f"malformed scene document: {e}") from e


def _parse_scene_dict(doc: dict, scene_dir: Path | None = None) -> SceneRecord:
    if not isinstance(doc, dict):
        raise SchemaViolation("scene document must be a JSON object")
    schema = _require(doc, "schema", "$")
    if schema != INPUT_SCHEMA:
        raise SchemaViolation(f"unsupported schema {schema!r}, expected {INPUT_SCHEMA!r}")
    scene_id = str(_require(doc, "scene_id", "$"))

    o = _require(doc, "origin", "$")
    origin = GeoOrigin(
        lat=float(_require(o, "lat", "origin")),
        lon=float(_require(o, "lon", "origin")),
        alt=float(o.get("alt", 0.0)),
    )

    poses = []
    for i, p in enumerate(doc.get("ego_poses", [])):
        path = f"ego_poses[{i}]"
        poses.append(EgoPose(
            timestamp=int(_require(p, "timestamp", path)),
            transform=RigidTransform(
                _vec(_require(p, "rotation", path), 4, f"{path}.rotation"),
                _vec(_require(p, "position", path), 3, f"{path}.position"),
            ),
        ))
    if not poses:
        raise EmptyScene(f"scene {scene_id!r} has no ego poses")

    cameras = []
    for i, c in enumerate(doc.get("cameras", [])):
        path = f"cameras[{i}]"
        cameras.append(CameraRig(
            name=str(c.get("name", f"cam{i}")),
            fx=float(_require(c, "fx", path)),
            fy=float(_require(c, "fy", path)),
            cx=float(_require(c, "cx", path)),
            cy=float(_require(c, "cy", path)),
            width=int(_require(c, "width", path)),
            height=int(_require(c, "height", path)),
            extrinsics=_transform(_require(c, "extrinsics", path), f"{path}.extrinsics"),
        ))
    if not cameras:
        raise SchemaViolation("scene has no cameras")

    objects = []
    for i, ob in enumerate(doc.get("objects", [])):
        path = f"objects[{i}]"
        if "yaw" in ob:
            yaw = float(ob["yaw"])
        elif "rotation" in ob:
            # full orientation reduced to heading; objects sit upright on the ground
            yaw = quat_to_yaw(_vec(ob["rotation"], 4, f"{path}.rotation"))
        else:
            raise SchemaViolation(f"missing field {path}.yaw (or {path}.rotation)")
        objects.append(ObjectBox(
            id=str(_require(ob, "id", path)),
            category=str(_require(ob, "category", path)),
            center=_vec(_require(ob, "center", path), 3, f"{path}.center"),
            size=_vec(_require(ob, "size", path), 3, f"{path}.size"),
            yaw=yaw,
            timestamp=int(_require(ob, "timestamp", path)),
        ))

    lidar_files = []
    for i, l in enumerate(doc.get("lidar", [])):
        f = str(_require(l, "file", f"lidar[{i}]"))
        lidar_files.append(str(scene_dir / f) if scene_dir is not None else f)

    return SceneRecord(
        scene_id=scene_id,
        origin=origin,
        ego_poses=tuple(poses),
        cameras=tuple(cameras),
        objects=tuple(objects),
        lidar_files=tuple(lidar_files),
    )


def scene_record_to_dict(record: SceneRecord, lidar_files: list[str] | None = None) -> dict:
    """Inverse of parse_scene_dict (lidar paths are emitted as given)."""
    files = lidar_files if lidar_files is not None else list(record.lidar_files)
    return {
        "schema": INPUT_SCHEMA,
        "scene_id": record.scene_id,
        "origin": {"lat": record.origin.lat, "lon": record.origin.lon, "alt": record.origin.alt},
        "ego_poses": [
            {
                "timestamp": p.timestamp,
                "position": p.transform.translation.tolist(),
                "rotation": p.transform.rotation.tolist(),
            }
            for p in record.ego_poses
        ],
        "cameras": [
            {
                "name": c.name,
                "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
                "width": c.width, "height": c.height,
                "extrinsics": {
                    "rotation": c.extrinsics.rotation.tolist(),
                    "translation": c.extrinsics.translation.tolist(),
                },
            }
            for c in record.cameras
        ],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "timestamp": o.timestamp,
                "center": o.center.tolist(),
                "size": o.size.tolist(),
                "yaw": o.yaw,
            }
            for o in record.objects
        ],
        "lidar": [{"timestamp": 0, "file": f} for f in files],
    }
