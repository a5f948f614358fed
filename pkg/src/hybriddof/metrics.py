"""Ground-truth DoF renderer and quality metrics.

The reference image is classic distributed ray tracing: many stratified
lens samples per full-res pixel, each aimed at the pixel's focus point,
averaged in linear light. SSIM follows the standard formulation (11x11
Gaussian window, sigma 1.5, K1=0.01, K2=0.03, unit dynamic range) with
border-cropped averaging.
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bvh import hit_details, intersect_rays
from .camera import field_split_weight  # noqa: F401  (re-exported for tests)
from .imgops import convolve_sep, gaussian_kernel
from .rng import uniform01
from .rtdof import RAY_TMIN, concentric_disk

_S_GT_U = 21
_S_GT_V = 22
_S_GT_PX = 23
_S_GT_PY = 24


def ground_truth_dof(scene, bvh, cam, spp=256, seed=0, workers=1, row_chunk=16):
    """Full-res reference render; deterministic for a fixed seed."""
    if spp < 1:
        raise ValueError("spp must be >= 1")
    w, h = cam.width, cam.height
    out = np.zeros((h, w, 3))
    side = int(np.floor(np.sqrt(spp) + 0.5))
    grid = side * side == spp
    lr = cam.aperture * 0.5
    for y0 in range(0, h, row_chunk):
        y1 = min(y0 + row_chunk, h)
        ys, xs = np.mgrid[y0:y1, 0:w]
        pix = (ys * w + xs).ravel().astype(np.uint64)
        npx = pix.size
        pid = np.repeat(pix, spp)
        sidx = np.tile(np.arange(spp, dtype=np.uint64), npx)
        u1 = uniform01(seed, _S_GT_U, pid, sidx)
        u2 = uniform01(seed, _S_GT_V, pid, sidx)
        if grid:
            u1 = (sidx % side + u1) / side
            u2 = (sidx // side + u2) / side
        else:
            u1 = (sidx + u1) / spp
        jx = uniform01(seed, _S_GT_PX, pid, sidx) - 0.5
        jy = uniform01(seed, _S_GT_PY, pid, sidx) - 0.5

        dx, dy = concentric_disk(u1, u2)
        origins = cam.position + np.outer(dx * lr, cam.right) + np.outer(dy * lr, cam.up)
        fx = np.repeat(xs.ravel(), spp) + jx
        fy = np.repeat(ys.ravel(), spp) + jy
        pin = cam.pixel_dirs(fx, fy)
        denom = pin @ cam.forward
        focus = cam.position + pin * (cam.focus_distance / denom)[:, None]
        dirs = focus - origins
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

        t, pidx, u, v = intersect_rays(bvh, origins, dirs, tmin=RAY_TMIN, workers=workers)
        _, _, _, color = hit_details(scene, bvh, origins, dirs, t, pidx, u, v)
        out[y0:y1] = color.reshape(npx, spp, 3).mean(axis=1).reshape(y1 - y0, w, 3)
    return out


# -- SSIM -----------------------------------------------------------------

_K1 = 0.01
_K2 = 0.03
_WIN = 11
_SIGMA = 1.5


def _ssim_single(a, b, data_range=1.0):
    pad = _WIN // 2
    k = gaussian_kernel(pad, _SIGMA)
    mu_a = convolve_sep(a, k)
    mu_b = convolve_sep(b, k)
    saa = convolve_sep(a * a, k) - mu_a * mu_a
    sbb = convolve_sep(b * b, k) - mu_b * mu_b
    sab = convolve_sep(a * b, k) - mu_a * mu_b
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    s = num / den
    return s[pad:-pad, pad:-pad].mean()


def ssim(a, b, data_range=1.0):
    """Mean SSIM over channels; images must share dimensions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        return float(_ssim_single(a, b, data_range))
    return float(np.mean([_ssim_single(a[..., c], b[..., c], data_range) for c in range(a.shape[-1])]))


def psnr(a, b, data_range=1.0):
    mse = np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2)
    if mse == 0:
        return np.inf
    return float(10.0 * np.log10(data_range * data_range / mse))


# -- per-pass timing -------------------------------------------------------

PASS_ORDER = [
    "rasterization",
    "post_process",
    "gbuffer_sigma_blur",
    "ray_trace",
    "accumulation",
    "median",
    "recon_composite",
    "final_taa",
    "others",
]


@dataclass
class PassTimer:
    """Wall-clock per pass for one frame; mirrors the usual profiling rows."""

    durations_ms: dict = dc_field(default_factory=dict)
    _t0: float = 0.0
    _frame_t0: float = 0.0

    def frame_start(self):
        self._frame_t0 = time.perf_counter()
        self.durations_ms = {}

    class _Section:
        def __init__(self, timer, name):
            self.timer = timer
            self.name = name

        def __enter__(self):
            self.t0 = time.perf_counter()

        def __exit__(self, *exc):
            dt = (time.perf_counter() - self.t0) * 1e3
            self.timer.durations_ms[self.name] = self.timer.durations_ms.get(self.name, 0.0) + dt
            return False

    def section(self, name):
        return self._Section(self, name)

    def frame_report(self):
        total = (time.perf_counter() - self._frame_t0) * 1e3
        named = sum(self.durations_ms.get(n, 0.0) for n in PASS_ORDER if n != "others")
        rows = {n: self.durations_ms.get(n, 0.0) for n in PASS_ORDER}
        rows["others"] = max(total - named, 0.0)
        rows["our_pass"] = sum(
            rows[n] for n in ("gbuffer_sigma_blur", "ray_trace", "accumulation", "median", "recon_composite")
        )
        rows["total"] = total
        rows["fps"] = 1000.0 / total if total > 0 else 0.0
        return rows
