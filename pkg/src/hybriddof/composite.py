"""Final merge of the sharp, post-process, and ray-trace branches.

Pixels inside the zone of focus keep the full-res sharp color; near-field
pixels take the ray-trace color except where bright bokeh favors the
post-process result; far-field pixels blend ray trace toward post-process
as the smoothstepped hit ratio rises (only hit ratios below 0.3 blend).
A feather band over CoC in [sqrt2, 2*sqrt2] px hides the zone boundary,
and pixels the ray branch never covered fall back to the classic
post-process color.
"""

import numpy as np

from .camera import SQRT2, coc_diameter_px, zone_of_focus
from .imgops import smoothstep


def smoothstep_scalar(e0, e1, x):
    if not e0 < e1:
        raise ValueError("smoothstep needs e0 < e1")
    return smoothstep(e0, e1, x)


def composite_frame(sharp, gbuffer, cam, post_up, rt_up, mode="hybrid"):
    """Per-pixel composite at full resolution.

    post_up: dict of upscaled post-process channels (near, near_alpha, far,
    far_alpha, bokeh, combined). rt_up: dict with rgb, h, data_w. Modes
    post-only / rt-only keep the matching branch; sharp bypasses both.
    """
    if mode == "sharp":
        return np.array(sharp, copy=True)
    depth = gbuffer.depth
    zone = zone_of_focus(cam)
    coc = coc_diameter_px(np.where(np.isfinite(depth), depth, np.inf), cam)
    blur_w = np.clip((coc - SQRT2) / SQRT2, 0.0, 1.0)  # feather over [sqrt2, 2sqrt2]

    near_mask = depth < zone.z_near

    if mode == "post-only":
        blurred = post_up["combined"]
    elif mode == "rt-only":
        blurred = rt_up["rgb"]
    elif mode == "hybrid":
        h_prime = smoothstep(0.0, 0.3, rt_up["h"])
        rt_rgb = rt_up["rgb"]
        near_blend = rt_rgb + (post_up["near"] - rt_rgb) * post_up["bokeh"][..., None]
        far_blend = rt_rgb + (post_up["far"] - rt_rgb) * h_prime[..., None]
        with_data = np.where(near_mask[..., None], near_blend, far_blend)
        data_w = np.clip(rt_up["data_w"], 0.0, 1.0)[..., None]
        blurred = post_up["combined"] * (1.0 - data_w) + with_data * data_w
    else:
        raise ValueError(f"unknown composite mode {mode!r}")

    return sharp * (1.0 - blur_w[..., None]) + blurred * blur_w[..., None]
