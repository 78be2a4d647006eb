"""Build Blender objects from a parsed interchange scene.

Imports bpy/mathutils at module level so tests can inject stand-ins before
loading this module; inside Blender the real modules are picked up.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import bpy
import mathutils

from .gltf_scene import InstanceNode, load_interchange

log = logging.getLogger(__name__)


@dataclass
class BridgeReport:
    scene_id: str
    imported_instances: int = 0
    imported_cameras: int = 0
    camera_names: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    rendered: list = field(default_factory=list)
    poses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "imported_instances": self.imported_instances,
            "imported_cameras": self.imported_cameras,
            "camera_names": list(self.camera_names),
            "warnings": list(self.warnings),
            "rendered": list(self.rendered),
            "poses": list(self.poses),
        }


def _matrix(m) -> "mathutils.Matrix":
    return mathutils.Matrix([list(row) for row in m])


def _link(obj):
    bpy.context.scene.collection.objects.link(obj)


def _unit_cube_mesh(name: str):
    mesh = bpy.data.meshes.new(name)
    v = [(-0.5, -0.5, -0.5), (0.5, -0.5, -0.5), (0.5, 0.5, -0.5), (-0.5, 0.5, -0.5),
         (-0.5, -0.5, 0.5), (0.5, -0.5, 0.5), (0.5, 0.5, 0.5), (-0.5, 0.5, 0.5)]
    f = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)]
    mesh.from_pydata(v, [], f)
    mesh.update()
    return mesh


def _asset_mesh(catalog_dir: Path | None, inst: InstanceNode, report: BridgeReport):
    """Embedded geometry, then the catalog OBJ, then a placeholder cube."""
    if inst.mesh is not None:
        mesh = bpy.data.meshes.new(f"mesh_{inst.name}")
        verts, faces = inst.mesh
        mesh.from_pydata([tuple(v) for v in verts], [], [tuple(t) for t in faces])
        mesh.update()
        return mesh, None
    if catalog_dir is not None and inst.asset_id:
        obj_path = Path(catalog_dir) / "meshes" / f"{inst.asset_id}.obj"
        if obj_path.is_file():
            try:
                verts, faces = _read_obj(obj_path)
                mesh = bpy.data.meshes.new(f"mesh_{inst.asset_id}")
                mesh.from_pydata(verts, [], faces)
                mesh.update()
                return mesh, None
            except ValueError as e:
                warning = f"{inst.name}: unreadable mesh {obj_path.name}: {e}"
                report.warnings.append(warning)
                log.warning("%s", warning)
    warning = f"{inst.name}: no mesh for asset {inst.asset_id!r}, placeholder cube used"
    report.warnings.append(warning)
    log.warning("%s", warning)
    # placeholder sized to the asset box so silhouettes stay roughly right
    return _unit_cube_mesh(f"cube_{inst.name}"), [float(d) for d in inst.dims]


def _read_obj(path: Path):
    verts, faces = [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append(tuple(float(c) for c in parts[1:4]))
        elif parts[0] == "f":
            idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
            faces.append(tuple(idx))
    if not verts or not faces:
        raise ValueError("no geometry")
    return verts, faces


def import_scene(interchange_path, catalog_dir=None) -> BridgeReport:
    """One Blender object per instance (named as in the file), plus static
    meshes, cameras with matching intrinsics, and the HDRI as world light."""
    scene = load_interchange(interchange_path)
    report = BridgeReport(scene_id=scene.scene_id)

    for inst in scene.instances:
        mesh, cube_dims = _asset_mesh(Path(catalog_dir) if catalog_dir else None, inst, report)
        obj = bpy.data.objects.new(inst.name, mesh)
        world = inst.matrix_world()
        if cube_dims is not None:
            s = [[cube_dims[0], 0, 0, 0], [0, cube_dims[1], 0, 0],
                 [0, 0, cube_dims[2], 0], [0, 0, 0, 1]]
            world = world @ _np_mat(s)
        obj.matrix_world = _matrix(world)
        obj.pass_index = inst.instance_id
        _link(obj)
        report.imported_instances += 1

    for static in scene.static_meshes:
        mesh = bpy.data.meshes.new(static.name)
        mesh.from_pydata([tuple(v) for v in static.vertices], [],
                         [tuple(t) for t in static.faces])
        mesh.update()
        obj = bpy.data.objects.new(static.name, mesh)
        obj.pass_index = 0
        _link(obj)

    for cam_node in scene.cameras:
        cam_data = bpy.data.cameras.new(cam_node.name)
        cam_data.angle_y = cam_node.yfov
        cam_data.sensor_fit = "VERTICAL"
        ex = cam_node.intrinsics
        if {"cx", "cy", "width", "height"} <= set(ex):
            cam_data.shift_x = (0.5 - float(ex["cx"]) / float(ex["width"]))
            cam_data.shift_y = (float(ex["cy"]) / float(ex["height"]) - 0.5)
        cam_data.clip_start = 0.1
        cam_data.clip_end = 1000.0
        obj = bpy.data.objects.new(cam_node.name, cam_data)
        obj.matrix_world = _matrix(cam_node.matrix_world())
        _link(obj)
        report.imported_cameras += 1
        report.camera_names.append(cam_node.name)

    _bind_world_hdri(scene.hdri, catalog_dir, report)
    return report


def _np_mat(rows):
    import numpy as np

    return np.array(rows, dtype=float)


def _bind_world_hdri(hdri_id: str, catalog_dir, report: BridgeReport):
    world = bpy.data.worlds.new("scenec_world")
    bpy.context.scene.world = world
    path = None
    if catalog_dir and hdri_id:
        for ext in (".hdr", ".exr"):
            candidate = Path(catalog_dir) / "hdri" / f"{hdri_id}{ext}"
            if candidate.is_file():
                path = candidate
                break
    if path is None:
        warning = f"HDRI {hdri_id!r} not found, default sky used"
        report.warnings.append(warning)
        log.warning("%s", warning)
        return
    world.use_nodes = True
    tree = world.node_tree
    env = tree.nodes.new("ShaderNodeTexEnvironment")
    env.image = bpy.data.images.load(str(path))
    background = tree.nodes["Background"]
    tree.links.new(env.outputs["Color"], background.inputs["Color"])


def render_rgb(report: BridgeReport, out_dir, resolution=(1600, 900),
               samples: int = 64, engine: str = "CYCLES",
               index_pass: bool = False) -> BridgeReport:
    """One RGB image per imported camera; optionally an object-index map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = bpy.context.scene
    scene.render.engine = engine
    scene.render.resolution_x = int(resolution[0])
    scene.render.resolution_y = int(resolution[1])
    scene.render.image_settings.file_format = "PNG"
    if engine == "CYCLES":
        scene.cycles.samples = int(samples)
    if index_pass:
        scene.view_layers[0].use_pass_object_index = True

    for name in report.camera_names:
        cam_obj = bpy.data.objects[name]
        scene.camera = cam_obj
        filepath = out / f"rgb_{name}.png"
        scene.render.filepath = str(filepath)
        try:
            bpy.ops.render.render(write_still=True)
        except Exception as e:  # surfaced with the camera id per the contract
            raise RuntimeError(f"render failed for camera {name}: {e}") from e
        report.rendered.append(str(filepath))
    return report
