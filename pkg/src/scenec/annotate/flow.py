"""Forward optical flow from depth, instance motion and camera pair.

Each hit pixel is back-projected with its depth, moved by its instance's
scene-frame motion (identity for static geometry), and re-projected through
the second camera; flow is the pixel displacement. Pixels whose target leaves
the second frustum are flagged invalid; no-hit pixels carry zero flow and are
invalid.
"""
from __future__ import annotations

import logging

import numpy as np

from ..geo import RigidTransform
from ..placement import CameraSample
from .raster import NEAR_PLANE

log = logging.getLogger(__name__)


def compute_flow(cam_t: CameraSample, cam_t1: CameraSample,
                 depth_t: np.ndarray, instance_t: np.ndarray,
                 motions: dict[int, RigidTransform] | None = None,
                 view_t=None, view_t1=None):
    """Returns (flow (H, W, 2) float32, valid (H, W) bool).

    view_t/view_t1 carry the effective projections when the rasters were not
    rendered at the rigs' native resolution (see raster.PinholeView).
    """
    from .raster import PinholeView

    motions = motions or {}
    h, w = depth_t.shape
    rig = view_t or PinholeView.from_rig(cam_t.rig, (w, h))
    rig1 = view_t1 or PinholeView.from_rig(cam_t1.rig)

    px, py = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    hit = depth_t > 0.0

    z = depth_t.astype(np.float64)
    x = (px - rig.cx) / rig.fx * z
    y = (py - rig.cy) / rig.fy * z
    pts_cam = np.stack([x[hit], y[hit], z[hit]], axis=1)

    scene_from_cam = cam_t.pose.inverse()
    pts_scene = scene_from_cam.apply(pts_cam)

    inst_flat = instance_t[hit]
    present = np.unique(inst_flat)
    for instance_id in present:
        if instance_id == 0:
            continue  # static geometry moves with the scene
        motion = motions.get(int(instance_id))
        if motion is None:
            if motions:
                log.warning("instance %d has no motion entry; identity assumed", instance_id)
            continue
        sel = inst_flat == instance_id
        pts_scene[sel] = motion.apply(pts_scene[sel])

    pts_cam1 = cam_t1.pose.apply(pts_scene)
    z1 = pts_cam1[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = rig1.fx * pts_cam1[:, 0] / z1 + rig1.cx
        v1 = rig1.fy * pts_cam1[:, 1] / z1 + rig1.cy

    ahead = z1 > NEAR_PLANE
    du = np.where(ahead, u1 - px[hit], 0.0)   # behind-camera targets are meaningless
    dv = np.where(ahead, v1 - py[hit], 0.0)
    flow = np.zeros((h, w, 2), dtype=np.float32)
    flow[hit, 0] = du.astype(np.float32)
    flow[hit, 1] = dv.astype(np.float32)

    in_frame = ahead & (u1 >= 0) & (u1 < rig1.width) & (v1 >= 0) & (v1 < rig1.height)
    valid = np.zeros((h, w), dtype=bool)
    valid[hit] = in_frame
    return flow, valid
