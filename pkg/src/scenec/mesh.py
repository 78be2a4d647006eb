"""Triangle meshes and polygon triangulation used by layout and export."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TriangulationFailure
from .geo import Polygon2


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    triangles: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int32))

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __len__(self) -> int:
        return len(self.triangles)

    def surface_area(self) -> float:
        v0 = self.vertices[self.triangles[:, 0]]
        v1 = self.vertices[self.triangles[:, 1]]
        v2 = self.vertices[self.triangles[:, 2]]
        return float(np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1).sum() / 2.0)

    def is_closed(self) -> bool:
        """Every undirected edge shared by exactly two triangles."""
        edges: dict[tuple[int, int], int] = {}
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                edges[key] = edges.get(key, 0) + 1
        return all(n == 2 for n in edges.values())


def merge_meshes(meshes, weld_tol: float = 1e-6) -> TriMesh:
    """Concatenate meshes, welding vertices that coincide within weld_tol."""
    key_to_index: dict[tuple, int] = {}
    verts: list[np.ndarray] = []
    tris: list[list[int]] = []
    for mesh in meshes:
        remap = np.empty(len(mesh.vertices), dtype=np.int64)
        for i, v in enumerate(mesh.vertices):
            key = tuple(np.round(v / weld_tol).astype(np.int64))
            idx = key_to_index.get(key)
            if idx is None:
                idx = len(verts)
                key_to_index[key] = idx
                verts.append(v)
            remap[i] = idx
        for tri in mesh.triangles:
            tris.append([remap[tri[0]], remap[tri[1]], remap[tri[2]]])
    if not verts:
        return TriMesh()
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int32))


def triangulate_polygon(poly: Polygon2) -> np.ndarray:
    """Ear-clip a simple CCW polygon into (n-2, 3) vertex-index triangles."""
    verts = poly.vertices
    n = len(verts)
    indices = list(range(n))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def is_ear(prev_i, i, next_i, remaining):
        a, b, c = verts[prev_i], verts[i], verts[next_i]
        if cross(a, b, c) <= 0:
            return False  # reflex or collinear corner
        for j in remaining:
            if j in (prev_i, i, next_i):
                continue
            p = verts[j]
            if (cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0):
                return False
        return True

    guard = 0
    while len(indices) > 3:
        guard += 1
        if guard > 2 * n * n:
            raise TriangulationFailure("no ear found; footprint is not a simple polygon")
        m = len(indices)
        clipped = False
        for k in range(m):
            prev_i, i, next_i = indices[k - 1], indices[k], indices[(k + 1) % m]
            if is_ear(prev_i, i, next_i, indices):
                tris.append((prev_i, i, next_i))
                indices.pop(k)
                clipped = True
                break
        if not clipped:
            raise TriangulationFailure("no ear found; footprint is not a simple polygon")
    tris.append(tuple(indices))
    return np.array(tris, dtype=np.int32)
