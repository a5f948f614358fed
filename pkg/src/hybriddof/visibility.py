"""Visibility pass: G-buffer, sharp all-in-focus image, motion vectors.

Visibility is resolved by casting one pinhole ray through each (jittered)
pixel center. For opaque scenes this is equivalent to a z-buffer
rasterizer while sharing the BVH with every other pass.
"""

from dataclasses import dataclass, field

import numpy as np

from .bvh import hit_details, intersect_rays
from .camera import ThinLensCamera

DEPTH_INF = np.inf


@dataclass
class GBuffer:
    width: int
    height: int
    depth: np.ndarray  # (h, w) view-space z, +inf background
    normal: np.ndarray  # (h, w, 3)
    albedo: np.ndarray  # (h, w, 3)
    specular: np.ndarray  # (h, w) emissive intensity of the hit material
    motion: np.ndarray  # (h, w, 2) pixels, current - previous
    world_pos: np.ndarray  # (h, w, 3); zeros for background
    disoccluded: np.ndarray = field(default=None)  # (h, w) bool


def render_visibility(scene, bvh, cam: ThinLensCamera, jitter=(0.0, 0.0), workers=1):
    """-> (GBuffer, sharp RGB image). Pinhole projection; aperture ignored."""
    if not (-0.5 <= jitter[0] <= 0.5 and -0.5 <= jitter[1] <= 0.5):
        raise ValueError("jitter must lie in [-0.5, 0.5]^2")
    w, h = cam.width, cam.height
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    dirs = cam.pixel_dirs(xs, ys, jitter).reshape(-1, 3)
    origins = np.broadcast_to(cam.position, dirs.shape)
    t, pid, u, v = intersect_rays(bvh, origins, dirs, tmin=0.0, workers=workers)
    pos, normal, mat_ids, color = hit_details(scene, bvh, origins, dirs, t, pid, u, v)

    hit = pid >= 0
    view_z = np.where(hit, t * (dirs @ cam.forward), DEPTH_INF)
    albedo_tab = np.array([m.albedo for m in scene.materials])
    emissive_tab = np.array([m.emissive for m in scene.materials])
    albedo = np.where(hit[:, None], albedo_tab[np.maximum(mat_ids, 0)], scene.background)
    specular = np.where(hit, emissive_tab[np.maximum(mat_ids, 0)], 0.0)

    gb = GBuffer(
        width=w,
        height=h,
        depth=view_z.reshape(h, w),
        normal=normal.reshape(h, w, 3),
        albedo=albedo.reshape(h, w, 3),
        specular=specular.reshape(h, w),
        motion=np.zeros((h, w, 2)),
        world_pos=pos.reshape(h, w, 3),
        disoccluded=np.zeros((h, w), dtype=bool),
    )
    return gb, color.reshape(h, w, 3)


def compute_motion_vectors(gb: GBuffer, cam_curr: ThinLensCamera, cam_prev: ThinLensCamera):
    """Fill gb.motion with screen-space displacement of each pixel's surface.

    motion = screen(worldPos, cam_curr) - screen(worldPos, cam_prev), in
    pixels, zero for background; samples whose previous-frame projection
    lands behind the eye are flagged disoccluded and zeroed.
    """
    h, w = gb.depth.shape
    finite = np.isfinite(gb.depth)
    pts = gb.world_pos.reshape(-1, 3)
    xc, yc, zc = cam_curr.project(pts)
    xp, yp, zp = cam_prev.project(pts)
    mx = (xc - xp).reshape(h, w)
    my = (yc - yp).reshape(h, w)
    bad = (~finite) | (zp.reshape(h, w) <= 1e-9) | ~np.isfinite(mx) | ~np.isfinite(my)
    gb.motion[..., 0] = np.where(bad, 0.0, mx)
    gb.motion[..., 1] = np.where(bad, 0.0, my)
    gb.disoccluded = bad & finite
    return gb
