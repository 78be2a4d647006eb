"""SceneGraph: the compiled virtual scene, its assembly, and the canonical
byte-stable serialization ("trove-scene/1").

Serialization is canonical — sorted keys, floats at 9 significant digits —
so two scenes are equal exactly when their serialized bytes are equal, and
golden-file comparisons are meaningful.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import SCENE_SCHEMA, __version__
from .errors import CorruptStream, DanglingAssetRef, SchemaVersionMismatch, SchemaViolation
from .geo import RigidTransform
from .ingest.types import AssetCatalog, CameraRig, GeoOrigin, ObjectBox, SceneRecord
from .background import KIND_TO_CLASS, BackgroundInstance
from .mesh import TriMesh
from .placement import AssetMatch, CameraSample, EgoClone, VehicleMount
from .rng import derive_rng
from .taxonomy import DEFAULT_TAXONOMY, ClassTaxonomy

log = logging.getLogger(__name__)

# class assigned to each named static mesh layer
MESH_LAYER_CLASSES = {
    "ground": "ground",
    "roads": "road",
    "sidewalks": "sidewalk",
    "buildings": "building",
}


@dataclass(frozen=True)
class SceneInstance:
    instance_id: int
    asset_id: str
    class_name: str
    pose: RigidTransform          # scene <- object
    scale: float
    dims: np.ndarray              # asset base dims (l, w, h); rendered size = dims * scale

    def __post_init__(self):
        if self.instance_id < 1:
            raise SchemaViolation(f"instance_id must be >= 1, got {self.instance_id}")
        if not self.scale > 0:
            raise SchemaViolation(f"instance {self.instance_id}: scale must be positive")
        d = np.asarray(self.dims, dtype=np.float64).reshape(3)
        if not np.all(d > 0):
            raise SchemaViolation(f"instance {self.instance_id}: dims must be positive")
        object.__setattr__(self, "dims", d)


@dataclass(eq=False)
class SceneGraph:
    scene_id: str
    seed: int
    origin: GeoOrigin
    instances: list[SceneInstance]
    meshes: dict[str, TriMesh]
    cameras: list[CameraSample]
    hdri: str
    materials: dict[str, str]
    taxonomy: ClassTaxonomy = field(default_factory=lambda: DEFAULT_TAXONOMY)

    def __eq__(self, other):
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return serialize(self) == serialize(other)

    def instance_by_id(self, instance_id: int) -> SceneInstance:
        return self.instances[instance_id - 1]


def assemble(record: SceneRecord, objects: list[ObjectBox], matches: list[AssetMatch],
             cameras: list[CameraSample], background: list[BackgroundInstance],
             catalog: AssetCatalog, seed: int, meshes: dict[str, TriMesh] | None = None,
             taxonomy: ClassTaxonomy = DEFAULT_TAXONOMY) -> SceneGraph:
    """Fuse placement, layout and background outputs into one SceneGraph.

    Instance ids are dense from 1 in deterministic order: annotated objects in
    (timestamp, id) order first, then background instances in sample order.
    HDRI and per-role materials are seeded draws from the catalog.
    """
    match_by_id = {m.object_id: m for m in matches}
    instances: list[SceneInstance] = []
    next_id = 1
    for obj in sorted(objects, key=lambda o: (o.timestamp, o.id)):
        match = match_by_id.get(obj.id)
        if match is None:
            log.warning("object %s has no asset match, skipped", obj.id)
            continue
        asset = _resolve_asset(catalog, match.asset_id)
        instances.append(SceneInstance(
            instance_id=next_id,
            asset_id=asset.asset_id,
            class_name=obj.category,
            pose=obj.pose(),
            scale=match.scale,
            dims=asset.bbox_dims,
        ))
        next_id += 1
    for inst in background:
        asset = _resolve_asset(catalog, inst.asset_id)
        height = float(asset.bbox_dims[2]) * inst.scale
        center = np.array([inst.position[0], inst.position[1], height / 2.0])
        instances.append(SceneInstance(
            instance_id=next_id,
            asset_id=asset.asset_id,
            class_name=KIND_TO_CLASS[inst.kind],
            pose=RigidTransform.from_yaw(inst.yaw, center),
            scale=inst.scale,
            dims=asset.bbox_dims,
        ))
        next_id += 1

    hdri = str(derive_rng(seed, "hdri").choice(list(catalog.hdris)))
    materials = {}
    for role in ("facade", "road", "sidewalk", "terrain"):
        options = sorted(m.material_id for m in catalog.materials_for_role(role))
        materials[role] = options[int(derive_rng(seed, "material", role).integers(0, len(options)))]

    return SceneGraph(
        scene_id=record.scene_id,
        seed=seed,
        origin=record.origin,
        instances=instances,
        meshes=dict(meshes or {}),
        cameras=list(cameras),
        hdri=hdri,
        materials=materials,
        taxonomy=taxonomy,
    )


def _resolve_asset(catalog: AssetCatalog, asset_id: str):
    try:
        return catalog.by_id(asset_id)
    except KeyError:
        raise DanglingAssetRef(f"asset {asset_id!r} not present in catalog") from None


# --- canonical serialization --------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise SchemaViolation(f"non-finite float in scene: {x}")
    if x == 0.0:
        return "0"  # normalize -0.0
    s = format(float(x), ".9g")
    return s


def _canonical(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(json.dumps(k) + ":" + _canonical(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if obj is None:
        return "null"
    raise SchemaViolation(f"unserializable value of type {type(obj).__name__}")


def canonical_json_bytes(obj) -> bytes:
    return (_canonical(obj) + "\n").encode("ascii")


def _transform_dict(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.tolist(), "translation": t.translation.tolist()}


def _transform_from(d: dict) -> RigidTransform:
    return RigidTransform(np.array(d["rotation"]), np.array(d["translation"]))


def _mesh_dict(m: TriMesh) -> dict:
    return {
        "vertices": [[float(c) for c in v] for v in m.vertices],
        "triangles": [[int(i) for i in t] for t in m.triangles],
    }


def _rig_dict(r: CameraRig) -> dict:
    return {
        "name": r.name, "fx": r.fx, "fy": r.fy, "cx": r.cx, "cy": r.cy,
        "width": r.width, "height": r.height,
        "extrinsics": _transform_dict(r.extrinsics),
    }


def scene_to_dict(scene: SceneGraph) -> dict:
    return {
        "schema": SCENE_SCHEMA,
        "meta": {
            "scene_id": scene.scene_id,
            "seed": scene.seed,
            "origin": {"lat": scene.origin.lat, "lon": scene.origin.lon, "alt": scene.origin.alt},
            "tool_version": __version__,
        },
        "instances": [
            {
                "instance_id": i.instance_id,
                "asset_id": i.asset_id,
                "class": i.class_name,
                "pose": _transform_dict(i.pose),
                "scale": i.scale,
                "dims": i.dims.tolist(),
            }
            for i in scene.instances
        ],
        "meshes": {name: _mesh_dict(m) for name, m in scene.meshes.items()},
        "cameras": [
            {
                "pose": _transform_dict(c.pose),
                "rig": _rig_dict(c.rig),
                "source": (
                    {"kind": "ego_clone", "timestamp": c.source.timestamp}
                    if isinstance(c.source, EgoClone)
                    else {"kind": "vehicle_mount", "object_id": c.source.object_id}
                ),
            }
            for c in scene.cameras
        ],
        "lighting": {"hdri": scene.hdri},
        "materials": dict(scene.materials),
    }


def serialize(scene: SceneGraph) -> bytes:
    """Canonical bytes; equal scenes serialize to equal bytes."""
    return canonical_json_bytes(scene_to_dict(scene))


def deserialize(data: bytes | str) -> SceneGraph:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptStream(f"scene stream is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise CorruptStream("scene stream must hold a JSON object")
    schema = doc.get("schema")
    if schema != SCENE_SCHEMA:
        raise SchemaVersionMismatch(f"got {schema!r}, expected {SCENE_SCHEMA!r}")
    try:
        return _scene_from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptStream(f"malformed scene document: {e}") from e


def _scene_from_dict(doc: dict) -> SceneGraph:
    meta = doc["meta"]
    origin = GeoOrigin(lat=meta["origin"]["lat"], lon=meta["origin"]["lon"],
                       alt=meta["origin"].get("alt", 0.0))
    instances = [
        SceneInstance(
            instance_id=int(i["instance_id"]),
            asset_id=i["asset_id"],
            class_name=i["class"],
            pose=_transform_from(i["pose"]),
            scale=float(i["scale"]),
            dims=np.array(i["dims"]),
        )
        for i in doc.get("instances", [])
    ]
    meshes = {
        name: TriMesh(np.array(m["vertices"], dtype=np.float64).reshape(-1, 3),
                      np.array(m["triangles"], dtype=np.int32).reshape(-1, 3))
        for name, m in doc.get("meshes", {}).items()
    }
    cameras = []
    for c in doc.get("cameras", []):
        rig = c["rig"]
        source = c["source"]
        cameras.append(CameraSample(
            pose=_transform_from(c["pose"]),
            rig=CameraRig(
                name=rig["name"], fx=rig["fx"], fy=rig["fy"], cx=rig["cx"], cy=rig["cy"],
                width=int(rig["width"]), height=int(rig["height"]),
                extrinsics=_transform_from(rig["extrinsics"]),
            ),
            source=(
                EgoClone(timestamp=int(source["timestamp"]))
                if source["kind"] == "ego_clone"
                else VehicleMount(object_id=source["object_id"])
            ),
        ))
    ids = [i.instance_id for i in instances]
    if ids != list(range(1, len(ids) + 1)):
        raise CorruptStream("instance ids must be dense from 1")
    return SceneGraph(
        scene_id=meta["scene_id"],
        seed=int(meta["seed"]),
        origin=origin,
        instances=instances,
        meshes=meshes,
        cameras=cameras,
        hdri=doc["lighting"]["hdri"],
        materials=dict(doc.get("materials", {})),
    )
