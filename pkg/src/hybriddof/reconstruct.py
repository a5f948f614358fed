"""Spatial reconstruction of the accumulated ray-trace image.

The merged color is median-filtered, reduced into a 4-level mip pyramid,
then re-gathered with a circular 49-tap kernel scaled to each pixel's
accumulated CoC. Sampling LOD follows lod = clamp(c_t * 0.05, 0, 3); the
gathered estimate replaces the original only in proportion to the clamped
variance blend b = clamp(sigma^2 * 2000, 0, 0.9).
"""

import numpy as np

from .imgops import bilinear
from .postdof import median3x3, ring_taps

MIP_LEVELS = 4
_TAPS49 = ring_taps(3, full_span=True)


def build_mips(img):
    """Levels 0..3; each level a 2x2 box reduction (edge-padded when odd)."""
    levels = [np.asarray(img, dtype=np.float64)]
    for _ in range(MIP_LEVELS - 1):
        prev = levels[-1]
        h, w = prev.shape[:2]
        if h % 2 or w % 2:
            prev = np.pad(prev, [(0, h % 2), (0, w % 2)] + [(0, 0)] * (prev.ndim - 2), mode="edge")
        levels.append(
            0.25 * (prev[0::2, 0::2] + prev[0::2, 1::2] + prev[1::2, 0::2] + prev[1::2, 1::2])
        )
    return levels


def lod_for(c_t):
    """Accumulated CoC (full-res px diameter) -> fractional mip level."""
    return np.clip(np.asarray(c_t, dtype=np.float64) * 0.05, 0.0, 3.0)


def sample_trilinear(mips, x, y, lod):
    """Fetch at level-0 coords (x, y), blending the two bracketing levels.

    Each mip level is fetched at most once per call (dense weight maps), so
    a 49-tap gather stays a handful of vectorized passes.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lod = np.clip(np.asarray(lod, dtype=np.float64), 0.0, MIP_LEVELS - 1.0)
    lo = np.floor(lod).astype(np.intp)
    hi = np.minimum(lo + 1, MIP_LEVELS - 1)
    frac = lod - lo
    chan = mips[0].shape[2:]
    out = np.zeros(np.broadcast_shapes(x.shape, lod.shape) + chan)
    for lv in range(MIP_LEVELS):
        w = np.where(lo == lv, 1.0 - frac, 0.0) + np.where(hi == lv, frac, 0.0)
        if not np.any(w > 0):
            continue
        scale = 0.5**lv
        s = bilinear(mips[lv], (x + 0.5) * scale - 0.5, (y + 0.5) * scale - 0.5)
        out += s * (w[..., None] if chan else w)
    return out


def gather_reconstruct(merged_rgb, c_t, sigma2, h, median_first=True):
    """-> (reconstructed rgb, reconstructed h).

    49-tap circular gather at radius c_t/4 (half-res px); taps whose own
    accumulated CoC radius cannot reach back to the center are rejected.
    b = clamp(sigma^2 * 2000, 0, 0.9) lerps between the original and the
    gathered estimate for both color and hit ratio.
    """
    h2, w2 = c_t.shape
    base = median3x3(merged_rgb) if median_first else np.asarray(merged_rgb, dtype=np.float64)
    mips = build_mips(base)
    gx, gy = np.meshgrid(np.arange(w2, dtype=np.float64), np.arange(h2, dtype=np.float64))
    radius = np.asarray(c_t, dtype=np.float64) / 4.0  # full-res diameter -> half-res radius
    lod = lod_for(c_t)

    rh_stack = np.stack([radius, h], axis=-1)
    acc = np.zeros_like(base)
    acc_h = np.zeros_like(radius)
    wsum = np.zeros_like(radius)
    for ux, uy, frac in _TAPS49:
        if frac == 0.0:
            col = base
            hh = h
            accept = np.ones_like(radius, dtype=bool)
        else:
            sx = gx + ux * radius
            sy = gy + uy * radius
            dist = frac * radius
            rh = bilinear(rh_stack, sx, sy)
            accept = rh[..., 0] >= dist  # sample's own CoC radius reaches back
            hh = rh[..., 1]
            col = sample_trilinear(mips, sx, sy, lod)
        w = accept.astype(np.float64)
        acc += col * w[..., None]
        acc_h += hh * w
        wsum += w
    gathered = acc / wsum[..., None]
    gathered_h = acc_h / wsum

    b = np.clip(sigma2 * 2000.0, 0.0, 0.9)
    out_rgb = base + (gathered - base) * b[..., None]
    out_h = h + (gathered_h - h) * b
    return out_rgb, out_h
