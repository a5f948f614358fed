"""Temporal anti-aliasing: Halton jitter and clamped history resolve.

TAA runs at up to three points of the frame: on the sharp image before
filtering, on the post-process output, and on the final composite. Each
instance keeps its own history buffer.
"""

from dataclasses import dataclass

import numpy as np

from .imgops import bilinear


def halton(index, base):
    f = 1.0
    r = 0.0
    i = int(index)
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


def halton_jitter(frame_index):
    """Subpixel offset in [-0.5, 0.5]^2 from the (2,3) Halton sequence."""
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    return halton(frame_index + 1, 2) - 0.5, halton(frame_index + 1, 3) - 0.5


@dataclass
class TaaState:
    history: np.ndarray = None


def _neighborhood_minmax(img):
    h, w = img.shape[:2]
    p = np.pad(img, [(1, 1), (1, 1), (0, 0)], mode="edge")
    lo = p[1 : h + 1, 1 : w + 1].copy()
    hi = lo.copy()
    for dy in range(3):
        for dx in range(3):
            win = p[dy : dy + h, dx : dx + w]
            np.minimum(lo, win, out=lo)
            np.maximum(hi, win, out=hi)
    return lo, hi


def taa_resolve(current, state: TaaState, motion, blend=0.9):
    """Blend reprojected, neighborhood-clamped history into the frame.

    History is fetched at p - motion (bilinear), clamped to the 3x3 min/max
    of the current frame to suppress fireflies, then blended with weight
    `blend`. Returns the resolved image; state.history is updated.
    """
    current = np.asarray(current, dtype=np.float64)
    if state.history is None or state.history.shape != current.shape:
        state.history = current.copy()
        return current.copy()
    h, w = current.shape[:2]
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sx = gx - motion[..., 0]
    sy = gy - motion[..., 1]
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    hist = bilinear(state.history, sx, sy)
    lo, hi = _neighborhood_minmax(current)
    hist = np.clip(hist, lo, hi)
    resolved = np.where(
        inside[..., None], current * (1.0 - blend) + hist * blend, current
    )
    state.history = resolved.copy()
    return resolved
