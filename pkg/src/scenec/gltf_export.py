"""glTF 2.0 interchange export.

The exported file is the language boundary: external renderers (and the
Blender bridge) consume only this. Instance nodes are named
`inst_<id>_<class>` (class lowercased, spaces -> underscores, parentheses
dropped) and carry asset/class/instance metadata in `extras`; static scene
meshes are embedded; cameras become perspective camera nodes.

Conventions: instance node TRS equals the SceneGraph pose (scene <- object).
Camera nodes compose the scene <- camera transform with a pi rotation about X
because glTF cameras look along -Y-up/-Z-forward while the pipeline's pinhole
model is +Z-forward/+Y-down.
"""
from __future__ import annotations

import base64
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MeshLoadFailure
from .geo import RigidTransform
from .ingest.types import AssetCatalog
from .mesh import TriMesh
from .scenegraph import SceneGraph

GLTF_CAMERA_FLIP = RigidTransform(np.array([0.0, 1.0, 0.0, 0.0]), np.zeros(3))  # R_x(pi)


def node_name(instance_id: int, class_name: str) -> str:
    slug = re.sub(r"[()]", "", class_name.lower()).strip()
    slug = re.sub(r"\s+", "_", slug)
    return f"inst_{instance_id}_{slug}"


def export_interchange(scene: SceneGraph, catalog: AssetCatalog | None = None,
                       path=None, embed_assets: bool = False) -> dict:
    """Build the glTF document; writes it to `path` when given.

    With embed_assets=True, catalog mesh_refs are loaded (OBJ) and embedded;
    a missing or unreadable mesh_ref raises MeshLoadFailure. The default keeps
    instances as empty nodes binding their asset by id in extras.
    """
    buffer = bytearray()
    buffer_views: list[dict] = []
    accessors: list[dict] = []
    meshes: list[dict] = []
    nodes: list[dict] = []
    cameras: list[dict] = []

    def add_blob(blob: bytes, target: int) -> int:
        offset = len(buffer)
        buffer.extend(blob)
        while len(buffer) % 4:
            buffer.append(0)
        buffer_views.append({"buffer": 0, "byteOffset": offset, "byteLength": len(blob),
                             "target": target})
        return len(buffer_views) - 1

    def add_mesh(name: str, mesh: TriMesh) -> int:
        pos = np.ascontiguousarray(mesh.vertices, dtype="<f4")
        idx = np.ascontiguousarray(mesh.triangles.reshape(-1), dtype="<u4")
        pos_view = add_blob(pos.tobytes(), 34962)
        idx_view = add_blob(idx.tobytes(), 34963)
        accessors.append({
            "bufferView": pos_view, "componentType": 5126, "count": len(pos),
            "type": "VEC3",
            "min": [float(v) for v in pos.min(axis=0)],
            "max": [float(v) for v in pos.max(axis=0)],
        })
        pos_acc = len(accessors) - 1
        accessors.append({
            "bufferView": idx_view, "componentType": 5125, "count": len(idx),
            "type": "SCALAR",
        })
        idx_acc = len(accessors) - 1
        meshes.append({
            "name": name,
            "primitives": [{"attributes": {"POSITION": pos_acc}, "indices": idx_acc,
                            "mode": 4}],
        })
        return len(meshes) - 1

    asset_mesh_index: dict[str, int] = {}
    if embed_assets and catalog is not None:
        for inst in scene.instances:
            if inst.asset_id in asset_mesh_index:
                continue
            entry = catalog.by_id(inst.asset_id)
            if not entry.mesh_ref:
                raise MeshLoadFailure(f"asset {inst.asset_id!r} has no mesh_ref")
            asset_mesh_index[inst.asset_id] = add_mesh(
                f"asset_{inst.asset_id}", load_obj(entry.mesh_ref))

    for inst in scene.instances:
        node = {
            "name": node_name(inst.instance_id, inst.class_name),
            "translation": [float(v) for v in inst.pose.translation],
            "rotation": _quat_xyzw(inst.pose.rotation),
            "scale": [inst.scale] * 3,
            "extras": {
                "instance_id": inst.instance_id,
                "asset_id": inst.asset_id,
                "class": inst.class_name,
                "dims": [float(v) for v in inst.dims],
            },
        }
        if inst.asset_id in asset_mesh_index:
            node["mesh"] = asset_mesh_index[inst.asset_id]
        nodes.append(node)

    for name, mesh in sorted(scene.meshes.items()):
        if len(mesh) == 0:
            continue
        nodes.append({"name": f"mesh_{name}", "mesh": add_mesh(name, mesh)})

    for i, cam in enumerate(scene.cameras):
        rig = cam.rig
        cameras.append({
            "type": "perspective",
            "name": rig.name,
            "perspective": {
                "yfov": 2.0 * math.atan(rig.height / (2.0 * rig.fy)),
                "aspectRatio": (rig.width * rig.fy) / (rig.height * rig.fx),
                "znear": 0.1,
                "zfar": 1000.0,
            },
        })
        world = cam.pose.inverse().compose(GLTF_CAMERA_FLIP)
        nodes.append({
            "name": f"cam_{i}",
            "camera": i,
            "translation": [float(v) for v in world.translation],
            "rotation": _quat_xyzw(world.rotation),
            "extras": {
                "fx": rig.fx, "fy": rig.fy, "cx": rig.cx, "cy": rig.cy,
                "width": rig.width, "height": rig.height,
            },
        })

    doc = {
        "asset": {"version": "2.0", "generator": f"scenec {__version__}"},
        "scene": 0,
        "scenes": [{
            "nodes": list(range(len(nodes))),
            "extras": {
                "scene_id": scene.scene_id,
                "seed": scene.seed,
                "hdri": scene.hdri,
                "materials": dict(scene.materials),
            },
        }],
        "nodes": nodes,
    }
    if cameras:
        doc["cameras"] = cameras
    if meshes:
        doc["meshes"] = meshes
        doc["accessors"] = accessors
        doc["bufferViews"] = buffer_views
        doc["buffers"] = [{
            "byteLength": len(buffer),
            "uri": "data:application/octet-stream;base64,"
                   + base64.b64encode(bytes(buffer)).decode("ascii"),
        }]

    if path is not None:
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    return doc


def _quat_xyzw(q_wxyz: np.ndarray) -> list[float]:
    w, x, y, z = (float(v) for v in q_wxyz)
    return [x, y, z, w]


def load_obj(path) -> TriMesh:
    """Minimal OBJ reader: v/f records, faces fan-triangulated."""
    p = Path(path)
    if not p.is_file():
        raise MeshLoadFailure(f"mesh file missing: {p}")
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    try:
        for line in p.read_text().splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(c) for c in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
    except (ValueError, IndexError) as e:
        raise MeshLoadFailure(f"{p}: malformed OBJ: {e}") from e
    if not verts or not tris:
        raise MeshLoadFailure(f"{p}: no geometry")
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int32))
