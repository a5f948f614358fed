"""Temporal accumulation of the ray-traced fields.

Near-field history is reprojected with motion vectors; far-field history
through the average world position of far hits (falling back to the 3x3
neighborhood). Both fields blend with a 0.95 exponential moving average
(reduced under motion), merge by accumulated hit ratio, and feed a
luminance-variance estimate that steers the next frame's ray mask.

Pixels that traced no rays this frame keep their history unchanged rather
than decaying toward black; a per-pixel accumulated data weight tracks how
much ray-trace information exists at all, so the composite can fall back
to pure post-processing where the mask never fired.
"""

from dataclasses import dataclass

import numpy as np

from .imgops import bilinear, gaussian_blur5, luminance


@dataclass
class TemporalState:
    near_rgb: np.ndarray
    far_rgb: np.ndarray
    h: np.ndarray  # accumulated hit ratio
    near_coc: np.ndarray
    far_coc: np.ndarray
    data_w: np.ndarray  # accumulated presence of ray data in [0, 1]
    mu1: np.ndarray  # luminance moment EMAs
    mu2: np.ndarray
    variance: np.ndarray  # blurred sigma^2 served to the ray mask
    prev_depth: np.ndarray  # half-res depth of the previous frame
    frame_index: int = -1

    @classmethod
    def empty(cls, h2, w2):
        z = lambda *s: np.zeros(s)
        return cls(
            near_rgb=z(h2, w2, 3),
            far_rgb=z(h2, w2, 3),
            h=z(h2, w2),
            near_coc=z(h2, w2),
            far_coc=z(h2, w2),
            data_w=z(h2, w2),
            mu1=z(h2, w2),
            mu2=z(h2, w2),
            variance=z(h2, w2),
            # negative sentinel: never matches a real depth, keeps frame 0
            # invalid without poisoning bilinear fetches with infinities
            prev_depth=np.full((h2, w2), -1.0),
        )


def _grid(h2, w2):
    gx, gy = np.meshgrid(np.arange(w2, dtype=np.float64), np.arange(h2, dtype=np.float64))
    return gx, gy


def reproject_near(state: TemporalState, motion_half, cur_depth, depth_tol=0.05):
    """Fetch history at p - motion; -> (channels dict, validity mask).

    Validity requires the source position in bounds and the previous depth
    within depth_tol (relative) of the current surface.
    """
    h2, w2 = state.h.shape
    gx, gy = _grid(h2, w2)
    sx = gx - motion_half[..., 0]
    sy = gy - motion_half[..., 1]
    inside = (sx >= 0) & (sx <= w2 - 1) & (sy >= 0) & (sy <= h2 - 1)
    prev_d = bilinear(state.prev_depth, sx, sy)
    cd = np.minimum(cur_depth, 1e6)
    pd = np.minimum(prev_d, 1e6)
    depth_ok = np.abs(pd - cd) <= depth_tol * cd
    valid = inside & depth_ok
    fetched = {
        "near_rgb": bilinear(state.near_rgb, sx, sy),
        "near_coc": bilinear(state.near_coc, sx, sy),
        "h": bilinear(state.h, sx, sy),
        "data_w": bilinear(state.data_w, sx, sy),
        "mu1": bilinear(state.mu1, sx, sy),
        "mu2": bilinear(state.mu2, sx, sy),
    }
    return fetched, valid


def reproject_far(state: TemporalState, field, cam_prev):
    """Fetch far-field history at the reprojected average far world position.

    Pixels without far hits borrow the 3x3 neighborhood average; pixels
    with no far data anywhere nearby are invalid.
    """
    h2, w2 = state.h.shape
    wsum = field.far_pos_w
    pos_w = field.far_pos * wsum[..., None]
    k = np.ones((3, 3))
    nb_w = _conv3(wsum, k)
    nb_pos = np.stack([_conv3(pos_w[..., c], k) for c in range(3)], axis=-1)
    have_own = wsum > 0
    have_nb = nb_w > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        wp = np.where(have_own[..., None], field.far_pos, nb_pos / np.maximum(nb_w, 1e-12)[..., None])
    usable = have_own | have_nb

    xp, yp, zp = cam_prev.project(wp.reshape(-1, 3))
    sx = ((xp - 0.5) * 0.5).reshape(h2, w2)
    sy = ((yp - 0.5) * 0.5).reshape(h2, w2)
    zs = zp.reshape(h2, w2)
    inside = (sx >= 0) & (sx <= w2 - 1) & (sy >= 0) & (sy <= h2 - 1)
    valid = usable & inside & (zs > 1e-9)
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)
    fetched = {
        "far_rgb": bilinear(state.far_rgb, sx, sy),
        "far_coc": bilinear(state.far_coc, sx, sy),
    }
    return fetched, valid


def _conv3(img, k):
    p = np.pad(img, 1, mode="constant")
    out = np.zeros_like(img)
    for dy in range(3):
        for dx in range(3):
            out += k[dy, dx] * p[dy : dy + img.shape[0], dx : dx + img.shape[1]]
    return out


def _alpha(valid, present, moving, blend, blend_motion):
    """Per-pixel history weight; pixels with neither history nor new data
    are zeroed by the caller."""
    a = np.where(moving, blend_motion, blend)
    a = np.where(valid, a, 0.0)
    # no new observation: keep what we have (if valid), else there is nothing
    a = np.where(~present & valid, 1.0, a)
    return a


def accumulate(field, state: TemporalState, near_fetch, near_valid, far_fetch, far_valid,
               motion_mag, cur_depth, blend=0.95, blend_motion=0.8, motion_threshold=0.5):
    """EMA update of both fields; returns (new_state, merged_rgb, merged_coc, h, data_w).

    Merge interpolates far->near by the accumulated hit ratio while static
    and by the latest hit ratio during motion, which keeps far-field
    history from smearing inside near-field silhouettes.
    """
    present = field.traced
    moving = motion_mag > motion_threshold

    a_near = _alpha(near_valid, present, moving, blend, blend_motion)
    a_far = _alpha(far_valid, present, moving, blend, blend_motion)

    dead_near = ~near_valid & ~present
    dead_far = ~far_valid & ~present

    def ema(a, hist, cur, dead):
        if hist.ndim == 3:
            a = a[..., None]
            dead = dead[..., None]
        return np.where(dead, 0.0, a * hist + (1.0 - a) * cur)

    near_rgb = ema(a_near, near_fetch["near_rgb"], field.near_rgb, dead_near)
    near_coc = ema(a_near, near_fetch["near_coc"], field.near_coc, dead_near)
    far_rgb = ema(a_far, far_fetch["far_rgb"], field.far_rgb, dead_far)
    far_coc = ema(a_far, far_fetch["far_coc"], field.far_coc, dead_far)

    # scalar channels (h, data weight, moments) ride the near-field
    # reprojection: far validity is legitimately false wherever no far-field
    # data exists and must not reset them
    a_s = a_near
    dead_s = dead_near
    h = ema(a_s, near_fetch["h"], field.near_frac, dead_s)
    data_w = ema(a_s, near_fetch["data_w"], present.astype(np.float64), dead_s)
    # history that just (re)started from a live observation is fully valid data
    fresh = present & (~near_valid | ~far_valid)
    data_w = np.where(fresh, 1.0, data_w)

    k = np.where(moving & present, field.near_frac, h)
    merged = far_rgb + (near_rgb - far_rgb) * k[..., None]
    merged_coc = far_coc + (near_coc - far_coc) * k

    new_state = TemporalState(
        near_rgb=near_rgb,
        far_rgb=far_rgb,
        h=h,
        near_coc=near_coc,
        far_coc=far_coc,
        data_w=data_w,
        mu1=state.mu1,
        mu2=state.mu2,
        variance=state.variance,
        prev_depth=np.array(cur_depth, copy=True),
        frame_index=state.frame_index + 1,
    )
    return new_state, merged, merged_coc, h, data_w, a_s, dead_s


def update_variance(merged_rgb, new_state: TemporalState, near_fetch, a_s, dead_s):
    """Luminance moment EMAs -> clamped variance -> 5x5 Gaussian blur.

    The blurred estimate is stored on the state and consumed by the ray
    mask next frame.
    """
    lum = luminance(merged_rgb)
    mu1 = np.where(dead_s, 0.0, a_s * near_fetch["mu1"] + (1.0 - a_s) * lum)
    mu2 = np.where(dead_s, 0.0, a_s * near_fetch["mu2"] + (1.0 - a_s) * lum * lum)
    sigma2 = np.maximum(mu2 - mu1 * mu1, 0.0)
    new_state.mu1 = mu1
    new_state.mu2 = mu2
    new_state.variance = gaussian_blur5(sigma2)
    return new_state.variance
