"""Reference importer: nuScenes v1.0 table layout -> "trove-in/1" scene dicts.

This converter is an interpretation, not part of the core contract. Choices
that the source format leaves open are made here and documented:

  * Scene frame: the global frame translated so the first ego position is the
    origin (ego starts at (0, 0, z)); rotations are untouched.
  * Geo anchor: a per-location reference coordinate plus the first ego pose's
    map offset, inverted through the same local projection the pipeline uses.
    The nuScenes maps carry no public geodetic registration, so the anchors
    below are city-level approximations.
  * Box sizes: nuScenes stores (width, length, height); reordered to
    (length, width, height).
  * Ego poses are taken from the LIDAR_TOP keyframes (the standard
    time-alignment convention for this dataset family).
  * Category names are reduced to the annotation taxonomy via
    NUSCENES_CATEGORY_MAP; unmapped categories become "void". "jeep" has no
    native source category and is never emitted by this importer.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from .. import INPUT_SCHEMA
from ..errors import MissingFile, SchemaViolation
from ..geo import RigidTransform
from .geoproj import unproject_xy
from .types import GeoOrigin

log = logging.getLogger(__name__)

LOCATION_ANCHORS = {
    "singapore-onenorth": (1.2993, 103.7874),
    "singapore-queenstown": (1.2942, 103.7861),
    "singapore-hollandvillage": (1.3119, 103.7960),
    "boston-seaport": (42.3514, -71.0466),
}

NUSCENES_CATEGORY_MAP = {
    "vehicle.car": "car",
    "vehicle.truck": "truck",
    "vehicle.bus.bendy": "bus",
    "vehicle.bus.rigid": "bus",
    "vehicle.construction": "construction (vehicle)",
    "vehicle.emergency.ambulance": "van",
    "vehicle.emergency.police": "car",
    "vehicle.trailer": "truck",
    "vehicle.motorcycle": "motorcycle rider",
    "vehicle.bicycle": "cycle rider",
    "human.pedestrian.adult": "human",
    "human.pedestrian.child": "human",
    "human.pedestrian.construction_worker": "human",
    "human.pedestrian.police_officer": "human",
    "human.pedestrian.personal_mobility": "human",
    "human.pedestrian.stroller": "human",
    "human.pedestrian.wheelchair": "human",
    "movable_object.barrier": "barrier",
    "movable_object.trafficcone": "traffic cone",
    "static_object.bicycle_rack": "void",
    "movable_object.debris": "void",
    "movable_object.pushable_pullable": "void",
    "animal": "void",
}

_TABLES = ("scene", "sample", "sample_data", "sample_annotation", "instance",
           "category", "ego_pose", "calibrated_sensor", "sensor", "log")


def _load_tables(table_dir: Path) -> dict[str, list[dict]]:
    tables = {}
    for name in _TABLES:
        path = table_dir / f"{name}.json"
        if not path.is_file():
            raise MissingFile(str(path))
        tables[name] = json.loads(path.read_text())
    return tables


def _index(rows: list[dict]) -> dict[str, dict]:
    return {r["token"]: r for r in rows}


def convert_nuscenes(table_dir, scene_name: str,
                     camera_channels=("CAM_FRONT",)) -> dict:
    """Convert one nuScenes scene into a "trove-in/1" dict."""
    t = _load_tables(Path(table_dir))
    scenes = {s["name"]: s for s in t["scene"]}
    if scene_name not in scenes:
        raise SchemaViolation(f"scene {scene_name!r} not present in scene.json")
    scene = scenes[scene_name]

    samples = _index(t["sample"])
    ego_poses = _index(t["ego_pose"])
    calibs = _index(t["calibrated_sensor"])
    sensors = _index(t["sensor"])
    instances = _index(t["instance"])
    categories = _index(t["category"])
    logs = _index(t["log"])

    # ordered samples for this scene, following the linked list
    ordered = []
    token = scene["first_sample_token"]
    while token:
        sample = samples.get(token)
        if sample is None:
            raise SchemaViolation(f"sample token {token!r} missing from sample.json")
        ordered.append(sample)
        token = sample.get("next", "")
    if not ordered:
        raise SchemaViolation(f"scene {scene_name!r} has no samples")
    scene_tokens = {s["token"] for s in ordered}

    # keyframe sample_data grouped by channel
    by_channel: dict[str, list[dict]] = {}
    for sd in t["sample_data"]:
        if not sd.get("is_key_frame") or sd["sample_token"] not in scene_tokens:
            continue
        channel = sensors[calibs[sd["calibrated_sensor_token"]]["sensor_token"]]["channel"]
        by_channel.setdefault(channel, []).append(sd)

    lidar_rows = sorted(by_channel.get("LIDAR_TOP", []), key=lambda r: r["timestamp"])
    if not lidar_rows:
        raise SchemaViolation("scene has no LIDAR_TOP keyframes to anchor ego poses")

    first_pose = ego_poses[lidar_rows[0]["ego_pose_token"]]
    origin_shift = list(first_pose["translation"])
    origin_shift[2] = 0.0  # keep absolute height

    poses_out = []
    for row in lidar_rows:
        p = ego_poses[row["ego_pose_token"]]
        poses_out.append({
            "timestamp": int(row["timestamp"]),
            "position": [p["translation"][i] - origin_shift[i] for i in range(3)],
            "rotation": list(p["rotation"]),
        })

    cameras_out = []
    for channel in camera_channels:
        rows = by_channel.get(channel)
        if not rows:
            log.warning("scene %s: no keyframes for channel %s", scene_name, channel)
            continue
        calib = calibs[rows[0]["calibrated_sensor_token"]]
        k = calib.get("camera_intrinsic")
        if not k:
            raise SchemaViolation(f"channel {channel} has no camera_intrinsic")
        # calibrated_sensor stores ego <- camera (sensor posed in the ego frame);
        # the rig wants camera <- ego
        mount = RigidTransform(calib["rotation"], calib["translation"])
        cam_from_ego = mount.inverse()
        cameras_out.append({
            "name": channel,
            "fx": float(k[0][0]), "fy": float(k[1][1]),
            "cx": float(k[0][2]), "cy": float(k[1][2]),
            "width": int(rows[0].get("width", 1600)),
            "height": int(rows[0].get("height", 900)),
            "extrinsics": {
                "rotation": cam_from_ego.rotation.tolist(),
                "translation": cam_from_ego.translation.tolist(),
            },
        })

    sample_ts = {s["token"]: int(s["timestamp"]) for s in ordered}
    objects_out = []
    for ann in t["sample_annotation"]:
        if ann["sample_token"] not in scene_tokens:
            continue
        cat_token = instances[ann["instance_token"]]["category_token"]
        src_name = categories[cat_token]["name"]
        category = NUSCENES_CATEGORY_MAP.get(src_name)
        if category is None:
            log.warning("unmapped category %r -> void", src_name)
            category = "void"
        w, l, h = ann["size"]  # source order is (width, length, height)
        objects_out.append({
            "id": ann["instance_token"],
            "category": category,
            "timestamp": sample_ts[ann["sample_token"]],
            "center": [ann["translation"][i] - origin_shift[i] for i in range(3)],
            "size": [float(l), float(w), float(h)],
            "rotation": list(ann["rotation"]),
        })

    location = logs[scene["log_token"]].get("location", "")
    anchor = LOCATION_ANCHORS.get(location)
    if anchor is None:
        log.warning("unknown location %r, geo origin defaults to (0, 0)", location)
        lat, lon = 0.0, 0.0
    else:
        # anchor + map offset of the first ego pose, through the local projection
        base = GeoOrigin(lat=anchor[0], lon=anchor[1])
        lat, lon = unproject_xy(origin_shift[0], origin_shift[1], base)

    return {
        "schema": INPUT_SCHEMA,
        "scene_id": scene_name,
        "origin": {"lat": lat, "lon": lon, "alt": 0.0},
        "ego_poses": poses_out,
        "cameras": cameras_out,
        "objects": objects_out,
        "lidar": [],
    }
