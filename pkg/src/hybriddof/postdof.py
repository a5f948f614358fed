"""Gather-based post-process DoF at half resolution.

Pipeline: 2x downscale -> per-tile CoC max with 3x3 dilation -> 9-tap
bilateral prefilter -> 81-tap main filter splitting foreground/background
contributions -> 3x3 median. CoC radii live in half-res pixel units here;
full-res CoC diameters are divided by 4 on the way in.
"""

import math
from dataclasses import dataclass

import numpy as np

from .camera import SQRT2, coc_diameter_px
from .imgops import bilinear, upsample2_bilinear

TILE = 8
DEPTH_CAP = 1e6


@dataclass
class HalfResLayer:
    color: np.ndarray  # (h2, w2, 3)
    coc_radius: np.ndarray  # (h2, w2) half-res pixels
    depth: np.ndarray  # (h2, w2) meters, background capped at DEPTH_CAP
    specular: np.ndarray  # (h2, w2)


@dataclass
class TileCocMax:
    tiles: np.ndarray  # (th, tw) dilated per-tile max coc radius

    def per_pixel(self, h2, w2):
        exp = np.repeat(np.repeat(self.tiles, TILE, axis=0), TILE, axis=1)
        return exp[:h2, :w2]


@dataclass
class PostColor:
    near: np.ndarray  # (h2, w2, 3) foreground contribution color
    near_alpha: np.ndarray  # normalized coverage of foreground weights
    far: np.ndarray
    far_alpha: np.ndarray
    bokeh: np.ndarray  # (h2, w2) proportion of high-specular taps
    combined: np.ndarray  # (h2, w2, 3) normalized total (the classic result)


def downscale_half(sharp, gbuffer, cam) -> HalfResLayer:
    """Half-res working layer: box-averaged color, min depth, fresh CoC."""
    h, w = sharp.shape[:2]
    ph, pw = h % 2, w % 2
    pad = lambda a: np.pad(a, [(0, ph), (0, pw)] + [(0, 0)] * (a.ndim - 2), mode="edge")
    sp = pad(sharp)
    color = 0.25 * (sp[0::2, 0::2] + sp[0::2, 1::2] + sp[1::2, 0::2] + sp[1::2, 1::2])
    dp = pad(gbuffer.depth)
    depth = np.minimum(
        np.minimum(dp[0::2, 0::2], dp[0::2, 1::2]), np.minimum(dp[1::2, 0::2], dp[1::2, 1::2])
    )
    spec = pad(gbuffer.specular)
    specular = np.maximum(
        np.maximum(spec[0::2, 0::2], spec[0::2, 1::2]),
        np.maximum(spec[1::2, 0::2], spec[1::2, 1::2]),
    )
    coc = coc_diameter_px(np.where(np.isfinite(depth), depth, np.inf), cam) / 4.0
    return HalfResLayer(
        color=color,
        coc_radius=np.asarray(coc),
        depth=np.minimum(depth, DEPTH_CAP),
        specular=specular,
    )


def tile_max_coc(layer: HalfResLayer) -> TileCocMax:
    """8x8-tile max CoC radius, dilated over the 3x3 tile neighborhood."""
    h2, w2 = layer.coc_radius.shape
    th = (h2 + TILE - 1) // TILE
    tw = (w2 + TILE - 1) // TILE
    padded = np.full((th * TILE, tw * TILE), -np.inf)
    padded[:h2, :w2] = layer.coc_radius
    tiles = padded.reshape(th, TILE, tw, TILE).max(axis=(1, 3))
    dil = np.pad(tiles, 1, mode="edge")
    out = tiles.copy()
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out = np.maximum(out, dil[dy : dy + th, dx : dx + tw])
    return TileCocMax(tiles=out)


def ring_taps(n_rings, full_span):
    """Unit tap set: center + rings of 8k samples.

    Ring k sits at fraction k/n_rings of the radius when full_span (the
    reconstruction layout) or k/4 when the 4-ring main-filter layout.
    Returns a list of (ux, uy, frac) with the center first.
    """
    taps = [(0.0, 0.0, 0.0)]
    denom = n_rings if full_span else 4
    for k in range(1, n_rings + 1):
        cnt = 8 * k
        frac = k / denom
        for j in range(cnt):
            ang = 2.0 * math.pi * (j + 0.5 * (k % 2)) / cnt
            taps.append((math.cos(ang) * frac, math.sin(ang) * frac, frac))
    return taps


_TAPS81 = ring_taps(4, full_span=False)
_TAPS49 = ring_taps(3, full_span=True)


def prefilter9(layer: HalfResLayer, tiles: TileCocMax, depth_falloff=0.1) -> HalfResLayer:
    """9-tap bilateral ring average filling main-filter undersampling gaps.

    Kernel diameter is max(tileMax/8, sqrt(2)); weights fall off with
    exp(-|dz|/depth_falloff) and are normalized to one.
    """
    h2, w2 = layer.depth.shape
    radius = np.maximum(tiles.per_pixel(h2, w2) / 8.0, SQRT2) * 0.5
    gx, gy = np.meshgrid(np.arange(w2, dtype=np.float64), np.arange(h2, dtype=np.float64))
    stacked = np.concatenate([layer.color, layer.depth[..., None]], axis=-1)
    acc = np.zeros_like(layer.color)
    wsum = np.zeros((h2, w2))
    for j in range(9):
        ang = 2.0 * math.pi * j / 9.0
        sx = gx + math.cos(ang) * radius
        sy = gy + math.sin(ang) * radius
        s = bilinear(stacked, sx, sy)
        wgt = np.exp(-np.abs(s[..., 3] - layer.depth) / depth_falloff)
        acc += s[..., 0:3] * wgt[..., None]
        wsum += wgt
    return HalfResLayer(
        color=acc / wsum[..., None],
        coc_radius=layer.coc_radius,
        depth=layer.depth,
        specular=layer.specular,
    )


def mainfilter81(
    layer: HalfResLayer,
    tiles: TileCocMax,
    specular_threshold=1.0,
    depth_range=0.1,
    fg_bias=1e-3,
) -> PostColor:
    """81-tap scatter-as-gather main filter.

    Each tap contributes alpha(r_i) when its own CoC radius reaches back to
    the kernel center; contributions split into foreground/background by
    signed depth difference ramped over depth_range. Pixels whose dilated
    max CoC is at most one pixel diagonal keep their own color exactly.
    """
    h2, w2 = layer.depth.shape
    kr = tiles.per_pixel(h2, w2)
    blurred = kr > SQRT2
    gx, gy = np.meshgrid(np.arange(w2, dtype=np.float64), np.arange(h2, dtype=np.float64))
    r0 = SQRT2 / 2.0
    stacked = np.concatenate(
        [layer.color, layer.depth[..., None], layer.coc_radius[..., None], layer.specular[..., None]],
        axis=-1,
    )

    v_f = np.zeros_like(layer.color)
    v_b = np.zeros_like(layer.color)
    w_f = np.zeros((h2, w2))
    w_b = np.zeros((h2, w2))
    bokeh_hits = np.zeros((h2, w2))

    for ux, uy, frac in _TAPS81:
        if frac == 0.0:
            c_i = layer.color
            z_i = layer.depth
            r_i = layer.coc_radius
            s_i = layer.specular
            accept = np.ones((h2, w2), dtype=bool)
        else:
            sx = gx + ux * kr
            sy = gy + uy * kr
            smp = bilinear(stacked, sx, sy)
            c_i = smp[..., 0:3]
            z_i = smp[..., 3]
            r_i = smp[..., 4]
            s_i = smp[..., 5]
            dist = frac * kr
            accept = (r_i >= dist) & blurred
        alpha = 1.0 / (math.pi * np.maximum(r_i, r0) ** 2)
        wgt = np.where(accept, alpha, 0.0)
        fgw = np.clip((layer.depth - z_i - fg_bias) / depth_range, 0.0, 1.0)
        v_f += (wgt * fgw)[..., None] * c_i
        v_b += (wgt * (1.0 - fgw))[..., None] * c_i
        w_f += wgt * fgw
        w_b += wgt * (1.0 - fgw)
        bokeh_hits += (s_i > specular_threshold).astype(np.float64)

    wsum = w_f + w_b
    # the center tap always contributes, so wsum > 0; guard regardless
    safe = np.maximum(wsum, 1e-12)
    combined = (v_f + v_b) / safe[..., None]
    near = v_f / np.maximum(w_f, 1e-12)[..., None]
    far = v_b / np.maximum(w_b, 1e-12)[..., None]
    near[w_f <= 0] = 0.0
    far[w_b <= 0] = 0.0
    # in-focus tiles keep their color exactly (identity contract)
    sharp_px = ~blurred
    combined[sharp_px] = layer.color[sharp_px]
    far[sharp_px] = layer.color[sharp_px]
    near[sharp_px] = 0.0
    w_f = np.where(sharp_px, 0.0, w_f)
    w_b = np.where(sharp_px, safe, w_b)
    return PostColor(
        near=near,
        near_alpha=w_f / safe,
        far=far,
        far_alpha=w_b / safe,
        bokeh=bokeh_hits / 81.0,
        combined=combined,
    )


def median3x3(img):
    """Per-channel 3x3 median via the classic min/max exchange network.

    Border pixels use clamped addressing so the window never leaves the
    image.
    """
    h, w = img.shape[:2]
    p = np.pad(img, [(1, 1), (1, 1)] + [(0, 0)] * (img.ndim - 2), mode="edge")
    v = [p[dy : dy + h, dx : dx + w].astype(np.float64) for dy in range(3) for dx in range(3)]

    def s2(a, b):
        v[a], v[b] = np.minimum(v[a], v[b]), np.maximum(v[a], v[b])

    def mn3(a, b, c):
        s2(a, b)
        s2(a, c)

    def mx3(a, b, c):
        s2(b, c)
        s2(a, c)

    def mnmx3(a, b, c):
        mx3(a, b, c)
        s2(a, b)

    def mnmx4(a, b, c, d):
        s2(a, b)
        s2(c, d)
        s2(a, c)
        s2(b, d)

    def mnmx5(a, b, c, d, e):
        s2(a, b)
        s2(c, d)
        mn3(a, c, e)
        mx3(b, d, e)

    def mnmx6(a, b, c, d, e, f):
        s2(a, d)
        s2(b, e)
        s2(c, f)
        mn3(a, b, c)
        mx3(d, e, f)

    mnmx6(0, 1, 2, 3, 4, 5)
    mnmx5(1, 2, 3, 4, 6)
    mnmx4(2, 3, 4, 7)
    mnmx3(3, 4, 8)
    return v[4]


def median_upscale(img, width, height):
    """The half-to-full upscale used at composite: median, then bilinear."""
    return upsample2_bilinear(median3x3(img), width, height)
