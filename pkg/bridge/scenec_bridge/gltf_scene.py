"""Pure-Python reader for the scenec interchange glTF.

No Blender dependency: this is the half of the bridge that parses node
transforms, embedded meshes and camera parameters, so it can be tested (and
the pose contract verified) without a Blender install.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATA_URI_PREFIX = "data:application/octet-stream;base64,"

_COMPONENT_DTYPES = {
    5120: np.int8, 5121: np.uint8, 5122: np.int16,
    5123: np.uint16, 5125: np.uint32, 5126: np.float32,
}
_TYPE_WIDTHS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


@dataclass
class InstanceNode:
    name: str
    instance_id: int
    asset_id: str
    class_name: str
    dims: np.ndarray
    translation: np.ndarray
    rotation_xyzw: np.ndarray
    scale: np.ndarray
    mesh: tuple[np.ndarray, np.ndarray] | None = None

    def matrix_world(self) -> np.ndarray:
        """4x4 T*R*S, same convention as the scene file's pose + scale."""
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix_xyzw(self.rotation_xyzw) * self.scale[None, :]
        m[:3, 3] = self.translation
        return m


@dataclass
class CameraNode:
    name: str
    translation: np.ndarray
    rotation_xyzw: np.ndarray
    yfov: float
    aspect: float
    intrinsics: dict = field(default_factory=dict)

    def matrix_world(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix_xyzw(self.rotation_xyzw)
        m[:3, 3] = self.translation
        return m


@dataclass
class StaticMeshNode:
    name: str
    vertices: np.ndarray
    faces: np.ndarray


@dataclass
class InterchangeScene:
    scene_id: str
    seed: int
    hdri: str
    materials: dict
    instances: list[InstanceNode]
    cameras: list[CameraNode]
    static_meshes: list[StaticMeshNode]


def quat_to_matrix_xyzw(q: np.ndarray) -> np.ndarray:
    x, y, z, w = (float(v) for v in q)
    n = math.sqrt(x * x + y * y + z * z + w * w)
    if n == 0:
        raise ValueError("zero quaternion")
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _decode_buffer(doc: dict) -> bytes:
    buffers = doc.get("buffers", [])
    if not buffers:
        return b""
    uri = buffers[0].get("uri", "")
    if not uri.startswith(DATA_URI_PREFIX):
        raise ValueError("only embedded data-URI buffers are supported")
    return base64.b64decode(uri[len(DATA_URI_PREFIX):])


def _read_accessor(doc: dict, blob: bytes, index: int) -> np.ndarray:
    acc = doc["accessors"][index]
    view = doc["bufferViews"][acc["bufferView"]]
    dtype = _COMPONENT_DTYPES[acc["componentType"]]
    width = _TYPE_WIDTHS[acc["type"]]
    start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    count = acc["count"] * width
    arr = np.frombuffer(blob, dtype=dtype, count=count, offset=start)
    return arr.reshape(acc["count"], width) if width > 1 else arr


def _mesh_arrays(doc: dict, blob: bytes, mesh_index: int):
    prim = doc["meshes"][mesh_index]["primitives"][0]
    pos = _read_accessor(doc, blob, prim["attributes"]["POSITION"]).astype(np.float64)
    idx = _read_accessor(doc, blob, prim["indices"]).astype(np.int64)
    return pos, idx.reshape(-1, 3)


def load_interchange(path) -> InterchangeScene:
    doc = json.loads(Path(path).read_text())
    blob = _decode_buffer(doc)
    extras = doc.get("scenes", [{}])[0].get("extras", {})

    instances: list[InstanceNode] = []
    cameras: list[CameraNode] = []
    statics: list[StaticMeshNode] = []
    for node in doc.get("nodes", []):
        name = node.get("name", "")
        translation = np.array(node.get("translation", [0.0, 0.0, 0.0]))
        rotation = np.array(node.get("rotation", [0.0, 0.0, 0.0, 1.0]))
        scale = np.array(node.get("scale", [1.0, 1.0, 1.0]))
        if name.startswith("inst_"):
            ex = node.get("extras", {})
            mesh = None
            if "mesh" in node:
                mesh = _mesh_arrays(doc, blob, node["mesh"])
            instances.append(InstanceNode(
                name=name,
                instance_id=int(ex.get("instance_id", _id_from_name(name))),
                asset_id=str(ex.get("asset_id", "")),
                class_name=str(ex.get("class", "")),
                dims=np.array(ex.get("dims", [1.0, 1.0, 1.0])),
                translation=translation,
                rotation_xyzw=rotation,
                scale=scale,
                mesh=mesh,
            ))
        elif "camera" in node:
            cam = doc["cameras"][node["camera"]]["perspective"]
            cameras.append(CameraNode(
                name=name,
                translation=translation,
                rotation_xyzw=rotation,
                yfov=float(cam["yfov"]),
                aspect=float(cam.get("aspectRatio", 1.0)),
                intrinsics=dict(node.get("extras", {})),
            ))
        elif "mesh" in node:
            pos, idx = _mesh_arrays(doc, blob, node["mesh"])
            statics.append(StaticMeshNode(name=name, vertices=pos, faces=idx))

    instances.sort(key=lambda i: i.instance_id)
    return InterchangeScene(
        scene_id=str(extras.get("scene_id", "")),
        seed=int(extras.get("seed", 0)),
        hdri=str(extras.get("hdri", "")),
        materials=dict(extras.get("materials", {})),
        instances=instances,
        cameras=cameras,
        static_meshes=statics,
    )


def _id_from_name(name: str) -> int:
    try:
        return int(name.split("_")[1])
    except (IndexError, ValueError):
        return 0


def compare_poses(scene: InterchangeScene, scene_json_path,
                  tol_m: float = 1e-4, tol_rad: float = 1e-4) -> list[dict]:
    """Per-instance translation/rotation error vs the compiler's scene file."""
    doc = json.loads(Path(scene_json_path).read_text())
    by_id = {i["instance_id"]: i for i in doc.get("instances", [])}
    rows = []
    for inst in scene.instances:
        ref = by_id.get(inst.instance_id)
        if ref is None:
            rows.append({"instance_id": inst.instance_id, "error": "missing in scene file"})
            continue
        ref_t = np.array(ref["pose"]["translation"])
        w, x, y, z = ref["pose"]["rotation"]
        ref_rot = quat_to_matrix_xyzw(np.array([x, y, z, w]))
        got_rot = quat_to_matrix_xyzw(inst.rotation_xyzw)
        t_err = float(np.linalg.norm(inst.translation - ref_t))
        # geodesic rotation distance
        cosang = (np.trace(ref_rot.T @ got_rot) - 1.0) / 2.0
        r_err = float(math.acos(max(-1.0, min(1.0, cosang))))
        rows.append({
            "instance_id": inst.instance_id,
            "translation_error_m": t_err,
            "rotation_error_rad": r_err,
            "ok": bool(t_err < tol_m and r_err < tol_rad),
        })
    return rows
