"""Software z-buffer rasterizer and ground-truth raster formats."""

from .raster import AnnotationBundle, SceneTriangles, rasterize, scene_triangles
from .flow import compute_flow
from .boxes import Box2D, Box3D, extract_boxes2d, extract_boxes3d
from .remap import remap_semantic

__all__ = [
    "AnnotationBundle",
    "SceneTriangles",
    "rasterize",
    "scene_triangles",
    "compute_flow",
    "Box2D",
    "Box3D",
    "extract_boxes2d",
    "extract_boxes3d",
    "remap_semantic",
]
