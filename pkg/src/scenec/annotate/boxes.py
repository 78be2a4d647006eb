"""2D boxes from instance masks; 3D boxes in the camera frame."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..placement import CameraSample
from ..scenegraph import SceneGraph

MIN_VISIBLE_PIXELS = 25


@dataclass(frozen=True)
class Box2D:
    instance_id: int
    class_id: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    visible_pixel_count: int


@dataclass(frozen=True)
class Box3D:
    instance_id: int
    class_id: int
    center: np.ndarray    # camera frame
    size: np.ndarray      # (l, w, h) after scaling
    yaw: float            # rotation in the camera X-Z plane, from +Z toward +X


def extract_boxes2d(bundle_or_instance, semantic20: np.ndarray | None = None,
                    min_pixels: int = MIN_VISIBLE_PIXELS) -> list[Box2D]:
    """Tight pixel bbox per visible instance; counts match the raster exactly.

    Accepts an AnnotationBundle or the (instance, semantic) raster pair.
    """
    if semantic20 is None:
        instance = bundle_or_instance.instance
        semantic20 = bundle_or_instance.semantic20
    else:
        instance = bundle_or_instance
    out = []
    ids, counts = np.unique(instance, return_counts=True)
    for instance_id, count in zip(ids, counts):
        if instance_id == 0 or count < min_pixels:
            continue
        ys, xs = np.nonzero(instance == instance_id)
        class_id = int(semantic20[ys[0], xs[0]])
        out.append(Box2D(
            instance_id=int(instance_id),
            class_id=class_id,
            x_min=int(xs.min()), y_min=int(ys.min()),
            x_max=int(xs.max()), y_max=int(ys.max()),
            visible_pixel_count=int(count),
        ))
    return out


def extract_boxes3d(scene: SceneGraph, camera: CameraSample,
                    visible_ids=None) -> list[Box3D]:
    """Camera-frame boxes for (visible) instances.

    Yaw is the object's heading projected into the camera's X-Z plane,
    measured from the optical axis (+Z) toward +X.
    """
    out = []
    cam_rot = camera.pose.rotation_matrix()
    for inst in scene.instances:
        if visible_ids is not None and inst.instance_id not in visible_ids:
            continue
        center = camera.pose.apply(inst.pose.translation)
        forward_scene = inst.pose.rotation_matrix() @ np.array([1.0, 0.0, 0.0])
        f = cam_rot @ forward_scene
        yaw = math.atan2(float(f[0]), float(f[2]))
        out.append(Box3D(
            instance_id=inst.instance_id,
            class_id=scene.taxonomy.id20(inst.class_name),
            center=center,
            size=inst.dims * inst.scale,
            yaw=yaw,
        ))
    return out


def boxes_to_json(boxes2d: list[Box2D], boxes3d: list[Box3D], taxonomy) -> dict:
    return {
        "boxes2d": [
            {
                "instance_id": b.instance_id,
                "class": taxonomy.names[b.class_id],
                "x_min": b.x_min, "y_min": b.y_min,
                "x_max": b.x_max, "y_max": b.y_max,
                "visible_pixel_count": b.visible_pixel_count,
            }
            for b in boxes2d
        ],
        "boxes3d": [
            {
                "instance_id": b.instance_id,
                "class": taxonomy.names[b.class_id],
                "center": [float(v) for v in b.center],
                "size": [float(v) for v in b.size],
                "yaw": b.yaw,
            }
            for b in boxes3d
        ],
    }
