"""Adaptive per-pixel ray counts from edge strength and luminance variance.

Edges come from a 5x5 Sobel over the Gaussian-smoothed G-buffer (depth and
normal channels), evaluated at half resolution; temporal luminance
variance, amplified by 1e5, adds rays where accumulation is still noisy.
Counts are capped at the budget m, with a floor of one ray per near-field
pixel.
"""

from dataclasses import dataclass

import numpy as np

from .camera import zone_of_focus
from .imgops import box_down2, convolve_sep, gaussian_blur5

VARIANCE_WEIGHT = 100000.0

# standard separable 5x5 Sobel: derivative x smoothing
_DERIV = np.array([1.0, 2.0, 0.0, -2.0, -1.0])
_SMOOTH = np.array([1.0, 4.0, 6.0, 4.0, 1.0])


@dataclass
class RayMask:
    counts: np.ndarray  # (h2, w2) int
    scale: float
    budget: int

    @property
    def total_rays(self):
        return int(self.counts.sum())


def blur_gbuffer(gbuffer):
    """5x5 Gaussian (sigma 1) on depth and each normal component.

    Background depth is capped to a large finite value first so the filter
    stays finite; the resulting huge depth deltas at silhouettes are
    exactly the edges the mask should flood with rays.
    """
    depth = np.minimum(gbuffer.depth, 1e3)
    return gaussian_blur5(depth), gaussian_blur5(gbuffer.normal)


def edge_strength(depth_blurred, normal_blurred):
    """Half-res Sobel magnitudes -> (delta_d, delta_n)."""
    d = box_down2(depth_blurred)
    n = box_down2(normal_blurred)
    gx = convolve_sep(d, _DERIV, _SMOOTH)
    gy = convolve_sep(d, _SMOOTH, _DERIV)
    delta_d = np.hypot(gx, gy)
    delta_n = np.zeros_like(delta_d)
    for c in range(n.shape[2]):
        gx = convolve_sep(n[..., c], _DERIV, _SMOOTH)
        gy = convolve_sep(n[..., c], _SMOOTH, _DERIV)
        delta_n += np.hypot(gx, gy)
    return delta_d, delta_n


def ray_count(delta_d, delta_n, scale, variance, budget, near_field):
    """Eq. chain: x -> x_n -> x_f, rounded and clamped.

    x = (delta_d + delta_n) * s; x_n = 1 - 1/(x+1); x_f = saturate(x_n +
    variance * 1e5) * m. Near-field pixels get at least one ray (unless the
    budget itself is zero).
    """
    if not 0.0 <= scale <= 1.0:
        raise ValueError("scale must be in [0, 1]")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    x = (delta_d + delta_n) * scale
    x_n = np.clip(1.0 - 1.0 / (x + 1.0), 0.0, 1.0)
    x_f = np.clip(x_n + variance * VARIANCE_WEIGHT, 0.0, 1.0) * budget
    counts = np.floor(x_f + 0.5).astype(np.int64)
    lo = np.where(near_field, min(1, budget), 0)
    return np.clip(counts, lo, budget)


def build_mask(gbuffer, cam, layer_depth, variance, scale, budget, epsilon_band=None) -> RayMask:
    """Full mask pass: blur -> Sobel -> counts against the focus zone."""
    zone = zone_of_focus(cam)
    db, nb = blur_gbuffer(gbuffer)
    delta_d, delta_n = edge_strength(db, nb)
    near = layer_depth < zone.z_near
    counts = ray_count(delta_d, delta_n, scale, variance, budget, near)
    return RayMask(counts=counts, scale=scale, budget=budget)
