"""Distributed ray-traced DoF inside the ray mask.

Per half-res pixel the mask requests N rays; each ray starts at a
stratified point on the lens disk and aims at the pixel's focus-plane
point. Hits split into near/far fields by their distance to the focus
plane; misses deposit the background color in the far field. Rays around
foreground silhouettes reach the geometry behind them, which is the whole
point of the branch.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bvh import hit_details, intersect_rays
from .camera import coc_diameter_px, field_split_weight
from .rng import uniform01

RAY_TMIN = 1e-4

# stream tags keeping the per-(pixel, frame) random streams disjoint
_S_LENS_U = 11
_S_LENS_V = 12


@dataclass
class FieldColorBuffer:
    """Struct-of-arrays form of the per-pixel near/far ray-trace result."""

    near_rgb: np.ndarray  # (h2, w2, 3) mean color of near-field mass
    near_frac: np.ndarray  # (h2, w2) near weight / rays = latest hit ratio
    far_rgb: np.ndarray
    far_frac: np.ndarray
    near_coc: np.ndarray  # (h2, w2) mean CoC diameter, full-res px
    far_coc: np.ndarray
    far_pos: np.ndarray  # (h2, w2, 3) mean world position of far hits
    far_pos_w: np.ndarray  # (h2, w2) weight behind far_pos (0 = none)
    traced: np.ndarray  # (h2, w2) bool, any ray this frame
    total_rays: int = 0
    ray_histogram: dict = field(default_factory=dict)

    @property
    def hit_ratio(self):
        return self.near_frac


def concentric_disk(u1, u2):
    """Shirley-Chiu mapping of the unit square onto the unit disk."""
    ox = 2.0 * np.asarray(u1, dtype=np.float64) - 1.0
    oy = 2.0 * np.asarray(u2, dtype=np.float64) - 1.0
    zero = (ox == 0.0) & (oy == 0.0)
    use_x = np.abs(ox) > np.abs(oy)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(use_x, ox, oy)
        theta = np.where(
            use_x,
            (math.pi / 4.0) * (oy / np.where(ox == 0.0, 1.0, ox)),
            (math.pi / 2.0) - (math.pi / 4.0) * (ox / np.where(oy == 0.0, 1.0, oy)),
        )
    x = np.where(zero, 0.0, r * np.cos(theta))
    y = np.where(zero, 0.0, r * np.sin(theta))
    return x, y


def lens_samples(pixel_ids, sample_idx, counts, seed, frame):
    """Stratified 2D points in the unit square, keyed by (pixel, frame).

    The first dimension is stratified over the per-pixel sample count; when
    the count is a perfect square a full 2D grid is used instead. The same
    seed always reproduces the same sequence.
    """
    u1 = uniform01(seed, frame, pixel_ids, _S_LENS_U * np.ones_like(pixel_ids), sample_idx)
    u2 = uniform01(seed, frame, pixel_ids, _S_LENS_V * np.ones_like(pixel_ids), sample_idx)
    side = np.floor(np.sqrt(counts.astype(np.float64)) + 0.5).astype(np.int64)
    grid = side * side == counts
    s1 = np.where(grid, (sample_idx % np.maximum(side, 1) + u1) / np.maximum(side, 1),
                  (sample_idx + u1) / counts)
    s2 = np.where(grid, (sample_idx // np.maximum(side, 1) + u2) / np.maximum(side, 1), u2)
    return s1, s2


def _trace_flat(px, py, counts, scene, bvh, cam, epsilon_band, seed, frame,
                jitter=(0.0, 0.0), workers=1):
    """Trace the flattened (pixel, count) set; returns per-ray arrays."""
    pixel_ids = py.astype(np.int64) * (1 << 20) + px.astype(np.int64)
    rep = np.repeat(np.arange(len(px)), counts)
    ray_pixel = pixel_ids[rep]
    sample_idx = np.arange(len(rep)) - np.repeat(np.cumsum(counts) - counts, counts)
    ray_counts = counts[rep]

    u1, u2 = lens_samples(ray_pixel, sample_idx, ray_counts, seed, frame)
    dx, dy = concentric_disk(u1, u2)
    lr = cam.aperture * 0.5
    origins = cam.position + np.outer(dx * lr, cam.right) + np.outer(dy * lr, cam.up)

    fx = 2.0 * px[rep] + 0.5
    fy = 2.0 * py[rep] + 0.5
    pin_dirs = cam.pixel_dirs(fx, fy, jitter)
    denom = pin_dirs @ cam.forward
    focus_pts = cam.position + pin_dirs * (cam.focus_distance / denom)[:, None]
    dirs = focus_pts - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    t, pid, u, v = intersect_rays(bvh, origins, dirs, tmin=RAY_TMIN, workers=workers)
    pos, normal, mat_ids, color = hit_details(scene, bvh, origins, dirs, t, pid, u, v)
    hit = pid >= 0
    view_z = np.where(hit, (pos - cam.position) @ cam.forward, np.inf)
    w_near = np.where(hit, field_split_weight(view_z, cam, epsilon_band), 0.0)
    coc = coc_diameter_px(view_z, cam)
    return rep, hit, color, pos, view_z, w_near, coc


def trace_frame(mask, scene, bvh, cam, epsilon_band, seed, frame,
                jitter=(0.0, 0.0), workers=1) -> FieldColorBuffer:
    """Run the mask's ray counts; pixels with zero rays stay empty."""
    h2, w2 = mask.counts.shape
    out = FieldColorBuffer(
        near_rgb=np.zeros((h2, w2, 3)),
        near_frac=np.zeros((h2, w2)),
        far_rgb=np.zeros((h2, w2, 3)),
        far_frac=np.zeros((h2, w2)),
        near_coc=np.zeros((h2, w2)),
        far_coc=np.zeros((h2, w2)),
        far_pos=np.zeros((h2, w2, 3)),
        far_pos_w=np.zeros((h2, w2)),
        traced=mask.counts > 0,
        total_rays=mask.total_rays,
    )
    ys, xs = np.nonzero(mask.counts)
    if xs.size == 0:
        return out
    counts = mask.counts[ys, xs].astype(np.int64)
    rep, hit, color, pos, view_z, w_near, coc = _trace_flat(
        xs, ys, counts, scene, bvh, cam, epsilon_band, seed, frame, jitter, workers
    )
    npix = len(xs)
    w_far = np.where(hit, 1.0 - w_near, 1.0)

    def acc(w):
        return np.bincount(rep, weights=w, minlength=npix)

    near_w = acc(w_near)
    far_w = acc(w_far)
    near_rgb = np.stack([acc(w_near * color[:, c]) for c in range(3)], axis=1)
    far_rgb = np.stack([acc(w_far * color[:, c]) for c in range(3)], axis=1)
    near_coc = acc(w_near * coc)
    far_coc = acc(w_far * coc)
    fpw = np.where(hit, w_far, 0.0)
    far_pos = np.stack([acc(fpw * pos[:, c]) for c in range(3)], axis=1)
    far_pos_w = acc(fpw)

    tot = counts.astype(np.float64)
    out.near_frac[ys, xs] = near_w / tot
    out.far_frac[ys, xs] = far_w / tot
    nz = np.maximum(near_w, 1e-12)[:, None]
    fz = np.maximum(far_w, 1e-12)[:, None]
    out.near_rgb[ys, xs] = np.where(near_w[:, None] > 0, near_rgb / nz, 0.0)
    out.far_rgb[ys, xs] = np.where(far_w[:, None] > 0, far_rgb / fz, 0.0)
    out.near_coc[ys, xs] = np.where(near_w > 0, near_coc / nz[:, 0], 0.0)
    out.far_coc[ys, xs] = np.where(far_w > 0, far_coc / fz[:, 0], 0.0)
    out.far_pos[ys, xs] = np.where(far_pos_w[:, None] > 0, far_pos / np.maximum(far_pos_w, 1e-12)[:, None], 0.0)
    out.far_pos_w[ys, xs] = far_pos_w

    hist_counts = np.bincount(counts, minlength=1)
    out.ray_histogram = {int(i): int(c) for i, c in enumerate(hist_counts) if c > 0}
    return out


def trace_pixel(x, y, count, scene, bvh, cam, epsilon_band, seed=0, frame=0):
    """Single-pixel FieldColor, mainly for tests and debugging."""
    from .raymask import RayMask

    counts = np.zeros((y + 1, x + 1), dtype=np.int64)
    counts[y, x] = count
    buf = trace_frame(RayMask(counts=counts, scale=1.0, budget=max(count, 1)),
                      scene, bvh, cam, epsilon_band, seed, frame)
    return buf
