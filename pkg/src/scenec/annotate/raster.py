"""Software z-buffer rasterizer producing pixel-exact ground truth.

Pinhole model: u = fx*X/Z + cx, v = fy*Y/Z + cy on camera-frame points
(+Z forward, +Y down); pixel (i, j) owns the center (i + 0.5, j + 0.5).
Coverage follows the top-left fill convention, no antialiasing, back-face
culling disabled. Depth is the camera-frame Z coordinate (not ray length).

Determinism: the per-pixel winner is the lexicographic minimum of
(depth, instance_id, triangle index), so output is independent of triangle
submission order and of how the image is tiled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateCamera
from ..geo import RigidTransform
from ..mesh import TriMesh
from ..placement import CameraSample
from ..scenegraph import MESH_LAYER_CLASSES, SceneGraph
from .remap import remap_semantic

NEAR_PLANE = 0.1
FAR_PLANE = 1000.0


@dataclass(frozen=True)
class PinholeView:
    """Effective projection for one render: rig intrinsics adapted to the
    output resolution (aspect-preserving rescale) or to an explicit crop."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @staticmethod
    def from_rig(rig, resolution=None, crop=None) -> "PinholeView":
        if resolution is None:
            resolution = (rig.width, rig.height)
        width, height = int(resolution[0]), int(resolution[1])
        if crop is not None:
            x0, y0 = float(crop[0]), float(crop[1])
            return PinholeView(rig.fx, rig.fy, rig.cx - x0, rig.cy - y0, width, height)
        if (width, height) == (rig.width, rig.height):
            return PinholeView(rig.fx, rig.fy, rig.cx, rig.cy, width, height)
        sx = width / rig.width
        sy = height / rig.height
        if abs(sx - sy) > 1e-6:
            raise DegenerateCamera(
                f"resolution {width}x{height} does not match the rig aspect "
                f"{rig.width}x{rig.height}; pass an explicit crop instead"
            )
        return PinholeView(rig.fx * sx, rig.fy * sy, rig.cx * sx, rig.cy * sy,
                           width, height)


@dataclass
class AnnotationBundle:
    """Per-camera ground-truth rasters plus box lists (filled by later stages)."""

    semantic20: np.ndarray          # (H, W) uint8, 20-class ids
    semantic13: np.ndarray          # (H, W) uint8, reduced ids
    instance: np.ndarray            # (H, W) int32, 0 = none
    depth: np.ndarray               # (H, W) float32 camera-frame Z, 0 = no hit / sky
    normals: np.ndarray             # (H, W, 3) float32 unit vectors, camera frame
    view: PinholeView | None = None         # effective projection used
    flow: np.ndarray | None = None          # (H, W, 2) float32, forward
    flow_valid: np.ndarray | None = None    # (H, W) bool
    boxes2d: list = field(default_factory=list)
    boxes3d: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.semantic20.shape[1]

    @property
    def height(self) -> int:
        return self.semantic20.shape[0]


@dataclass(frozen=True)
class SceneTriangles:
    """Flattened triangle soup with per-triangle instance and class ids."""

    vertices: np.ndarray            # (N, 3) scene frame
    triangles: np.ndarray           # (M, 3) int32
    instance_ids: np.ndarray        # (M,) int32, 0 for static layers
    class_ids: np.ndarray           # (M,) uint8


def unit_box_mesh(dims) -> TriMesh:
    """Axis-aligned box centered at the origin with the given (l, w, h)."""
    l, w, h = (float(d) / 2.0 for d in dims)
    v = np.array([
        [-l, -w, -h], [l, -w, -h], [l, w, -h], [-l, w, -h],
        [-l, -w, h], [l, -w, h], [l, w, h], [-l, w, h],
    ])
    t = np.array([
        [0, 2, 1], [0, 3, 2],      # bottom (-z)
        [4, 5, 6], [4, 6, 7],      # top (+z)
        [0, 1, 5], [0, 5, 4],      # -y side
        [1, 2, 6], [1, 6, 5],      # +x side
        [2, 3, 7], [2, 7, 6],      # +y side
        [3, 0, 4], [3, 4, 7],      # -x side
    ], dtype=np.int32)
    return TriMesh(v, t)


def scene_triangles(scene: SceneGraph, taxonomy=None) -> SceneTriangles:
    """Bake a SceneGraph into a renderable soup (instances as scaled boxes).

    Placeholder geometry: each instance renders as its asset bounding box
    scaled by the match factor; static layers use their stored meshes.
    Build once per scene and reuse across cameras.
    """
    tax = taxonomy or scene.taxonomy
    verts: list[np.ndarray] = []
    tris: list[np.ndarray] = []
    inst_ids: list[np.ndarray] = []
    cls_ids: list[np.ndarray] = []
    offset = 0

    def push(mesh: TriMesh, instance_id: int, class_id: int):
        nonlocal offset
        if len(mesh) == 0:
            return
        verts.append(mesh.vertices)
        tris.append(mesh.triangles.astype(np.int64) + offset)
        inst_ids.append(np.full(len(mesh), instance_id, dtype=np.int32))
        cls_ids.append(np.full(len(mesh), class_id, dtype=np.uint8))
        offset += len(mesh.vertices)

    for name in sorted(scene.meshes):
        class_name = MESH_LAYER_CLASSES.get(name, "void")
        push(scene.meshes[name], 0, tax.id20(class_name))

    for inst in scene.instances:
        box = unit_box_mesh(inst.dims * inst.scale)
        world = inst.pose.apply(box.vertices)
        push(TriMesh(world, box.triangles), inst.instance_id, tax.id20(inst.class_name))

    if not verts:
        return SceneTriangles(
            vertices=np.empty((0, 3)), triangles=np.empty((0, 3), dtype=np.int32),
            instance_ids=np.empty(0, dtype=np.int32), class_ids=np.empty(0, dtype=np.uint8),
        )
    return SceneTriangles(
        vertices=np.vstack(verts),
        triangles=np.vstack(tris).astype(np.int32),
        instance_ids=np.concatenate(inst_ids),
        class_ids=np.concatenate(cls_ids),
    )


def rasterize(scene: SceneGraph, camera: CameraSample, resolution=None,
              tiles: int = 1, soup: SceneTriangles | None = None,
              crop=None) -> AnnotationBundle:
    """Render one camera view of the scene into an AnnotationBundle."""
    if soup is None:
        soup = scene_triangles(scene)
    view = PinholeView.from_rig(camera.rig, resolution, crop)
    buffers = rasterize_triangles(
        soup, camera.pose, view.fx, view.fy, view.cx, view.cy,
        view.width, view.height, tiles=tiles)
    return _buffers_to_bundle(buffers, scene.taxonomy, view)


def _buffers_to_bundle(buffers, taxonomy, view=None) -> AnnotationBundle:
    depth64, inst, cls, normals = buffers
    hit = np.isfinite(depth64)
    depth = np.where(hit, depth64, 0.0).astype(np.float32)
    semantic20 = np.where(hit, cls, taxonomy.sky_id20).astype(np.uint8)
    return AnnotationBundle(
        semantic20=semantic20,
        semantic13=remap_semantic(semantic20, taxonomy),
        instance=inst.astype(np.int32),
        depth=depth,
        normals=normals.astype(np.float32),
        view=view,
    )


def rasterize_triangles(soup: SceneTriangles, pose: RigidTransform,
                        fx: float, fy: float, cx: float, cy: float,
                        width: int, height: int, tiles: int = 1):
    """Core loop; returns (depth float64 w/ inf=no-hit, instance, class, normals)."""
    if fx <= 0 or fy <= 0 or not all(map(math.isfinite, (fx, fy, cx, cy))):
        raise DegenerateCamera(f"bad intrinsics fx={fx} fy={fy} cx={cx} cy={cy}")

    depth = np.full((height, width), np.inf, dtype=np.float64)
    inst = np.zeros((height, width), dtype=np.int32)
    cls = np.zeros((height, width), dtype=np.uint8)
    tri_idx = np.full((height, width), np.iinfo(np.int32).max, dtype=np.int32)
    normals = np.zeros((height, width, 3), dtype=np.float64)

    if len(soup.triangles) == 0:
        return depth, inst, cls, normals

    cam_verts = pose.apply(soup.vertices)

    if tiles <= 1:
        bands = [(0, height)]
    else:
        edges = np.linspace(0, height, tiles + 1).astype(int)
        bands = [(int(edges[i]), int(edges[i + 1])) for i in range(tiles)
                 if edges[i + 1] > edges[i]]

    for t_index, tri in enumerate(soup.triangles):
        tri_cam = cam_verts[tri]
        z = tri_cam[:, 2]
        if np.all(z < NEAR_PLANE) or np.all(z > FAR_PLANE):
            continue
        normal = np.cross(tri_cam[1] - tri_cam[0], tri_cam[2] - tri_cam[0])
        norm = np.linalg.norm(normal)
        if norm == 0.0:
            continue
        normal = normal / norm
        # orient toward the camera (surface faces the viewer)
        if float(normal @ tri_cam.mean(axis=0)) > 0.0:
            normal = -normal

        polys = ([tri_cam] if np.all(z >= NEAR_PLANE)
                 else _clip_near(tri_cam))
        for poly in polys:
            for k in range(1, len(poly) - 1):
                sub = np.array([poly[0], poly[k], poly[k + 1]])
                for y0, y1 in bands:
                    _raster_one(
                        sub, normal, int(soup.instance_ids[t_index]),
                        int(soup.class_ids[t_index]), t_index,
                        fx, fy, cx, cy, width, y0, y1,
                        depth, inst, cls, tri_idx, normals,
                    )
    return depth, inst, cls, normals


def _clip_near(tri_cam: np.ndarray) -> list[np.ndarray]:
    """Clip a camera-space triangle against Z = NEAR_PLANE; 0 or 1 polygon."""
    out: list[np.ndarray] = []
    poly = list(tri_cam)
    res = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        da, db = a[2] - NEAR_PLANE, b[2] - NEAR_PLANE
        if da >= 0:
            res.append(a)
            if db < 0:
                t = da / (da - db)
                res.append(a + t * (b - a))
        elif db >= 0:
            t = da / (da - db)
            res.append(a + t * (b - a))
    if len(res) >= 3:
        out.append(np.array(res))
    return out


def _raster_one(tri_cam, normal, instance_id, class_id, t_index,
                fx, fy, cx, cy, width, y0, y1,
                depth, inst, cls, tri_idx, normals):
    z = tri_cam[:, 2]
    u = fx * tri_cam[:, 0] / z + cx
    v = fy * tri_cam[:, 1] / z + cy

    area2 = (u[1] - u[0]) * (v[2] - v[0]) - (v[1] - v[0]) * (u[2] - u[0])
    if area2 == 0.0:
        return
    if area2 < 0.0:  # normalize winding so edge functions are >= 0 inside
        u = u[[0, 2, 1]]
        v = v[[0, 2, 1]]
        z = z[[0, 2, 1]]
        area2 = -area2

    ix0 = max(0, int(math.ceil(u.min() - 0.5)))
    ix1 = min(width - 1, int(math.floor(u.max() - 0.5)))
    iy0 = max(y0, int(math.ceil(v.min() - 0.5)))
    iy1 = min(y1 - 1, int(math.floor(v.max() - 0.5)))
    if ix0 > ix1 or iy0 > iy1:
        return

    px = np.arange(ix0, ix1 + 1) + 0.5
    py = (np.arange(iy0, iy1 + 1) + 0.5)[:, None]

    cover = None
    lams = []
    for e in range(3):
        a, b = (e + 1) % 3, (e + 2) % 3
        eu, ev = u[b] - u[a], v[b] - v[a]
        val = eu * (py - v[a]) - ev * (px - u[a])
        # top-left rule: zero-valued edges count only for top or left edges
        include_zero = (ev < 0.0) or (ev == 0.0 and eu > 0.0)
        edge_ok = (val >= 0.0) if include_zero else (val > 0.0)
        cover = edge_ok if cover is None else (cover & edge_ok)
        lams.append(val / area2)
    if not np.any(cover):
        return

    if z[0] == z[1] == z[2]:
        pz = np.full(cover.shape, z[0])  # fronto-parallel: exact constant depth
    else:
        inv_z = lams[0] / z[0] + lams[1] / z[1] + lams[2] / z[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            pz = 1.0 / inv_z
    cover = cover & (pz >= NEAR_PLANE) & (pz <= FAR_PLANE)
    if not np.any(cover):
        return

    dwin = depth[iy0:iy1 + 1, ix0:ix1 + 1]
    iwin = inst[iy0:iy1 + 1, ix0:ix1 + 1]
    twin = tri_idx[iy0:iy1 + 1, ix0:ix1 + 1]

    better = cover & (
        (pz < dwin)
        | ((pz == dwin) & (instance_id < iwin))
        | ((pz == dwin) & (instance_id == iwin) & (t_index < twin))
    )
    if not np.any(better):
        return
    dwin[better] = pz[better]
    iwin[better] = instance_id
    cls[iy0:iy1 + 1, ix0:ix1 + 1][better] = class_id
    twin[better] = t_index
    normals[iy0:iy1 + 1, ix0:ix1 + 1][better] = normal
