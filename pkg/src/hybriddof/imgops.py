"""Small image operations shared by the filtering passes.

All images are numpy arrays indexed [y, x] or [y, x, c], float64 linear
light unless stated otherwise. Sampling coordinates are pixel-center based:
(x, y) = (0, 0) is the center of the top-left pixel.
"""

import numpy as np


def bilinear(img, x, y):
    """Bilinear fetch at fractional pixel coords, clamped at the borders.

    x, y may be arrays of any matching shape; returns samples with the
    image's channel dimension appended when present. The gather loop is one
    of the compiled hot kernels (with a numpy fallback).
    """
    from . import backend

    h, w = img.shape[:2]
    shape = np.shape(x)
    xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    ys = np.ascontiguousarray(y, dtype=np.float64).ravel()
    chans = img.shape[2] if img.ndim == 3 else 1
    flat = np.ascontiguousarray(img.reshape(h * w, chans), dtype=np.float64)
    out = np.empty((len(xs), chans))
    backend.bilinear_gather(flat, h, w, xs, ys, out)
    return out.reshape(shape + img.shape[2:])


def nearest(img, x, y):
    """Nearest-neighbor fetch, clamped."""
    h, w = img.shape[:2]
    xi = np.clip(np.rint(x).astype(np.intp), 0, w - 1)
    yi = np.clip(np.rint(y).astype(np.intp), 0, h - 1)
    return img[yi, xi]


def gaussian_kernel(radius, sigma):
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def convolve_sep(img, kx, ky=None):
    """Separable 2D convolution with clamped (edge-replicated) borders."""
    if ky is None:
        ky = kx
    rx = len(kx) // 2
    ry = len(ky) // 2
    pad = [(ry, ry), (rx, rx)] + [(0, 0)] * (img.ndim - 2)
    p = np.pad(img, pad, mode="edge")
    out = np.zeros_like(p[ry:-ry or None, :])
    for i, wgt in enumerate(ky):
        out += wgt * p[i : i + img.shape[0], :]
    res = np.zeros_like(img, dtype=np.float64)
    for i, wgt in enumerate(kx):
        res += wgt * out[:, i : i + img.shape[1]]
    return res


def gaussian_blur5(img, sigma=1.0):
    """The 5x5 Gaussian used for G-buffer smoothing and the variance blur."""
    k = gaussian_kernel(2, sigma)
    return convolve_sep(img, k)


def box_down2(img):
    """2x2 box average; odd sizes replicate the last row/column."""
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        img = np.pad(
            img,
            [(0, h % 2), (0, w % 2)] + [(0, 0)] * (img.ndim - 2),
            mode="edge",
        )
    return 0.25 * (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2])


def upsample2_bilinear(img, width, height):
    """Upscale a half-resolution buffer to (width, height) full resolution."""
    xs = (np.arange(width, dtype=np.float64) + 0.5) / 2.0 - 0.5
    ys = (np.arange(height, dtype=np.float64) + 0.5) / 2.0 - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear(img, gx, gy)


def luminance(rgb):
    """Rec. 709 luma of a linear RGB image."""
    return rgb[..., 0] * 0.2126 + rgb[..., 1] * 0.7152 + rgb[..., 2] * 0.0722


def smoothstep(e0, e1, x):
    """Hermite step: 0 below e0, 1 above e1, t^2(3-2t) in between."""
    t = np.clip((np.asarray(x, dtype=np.float64) - e0) / (e1 - e0), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def shift2d(img, dx, dy):
    """Integer-shift with edge clamp (used only in tests and debug views)."""
    h, w = img.shape[:2]
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    return img[np.ix_(ys, xs)]
