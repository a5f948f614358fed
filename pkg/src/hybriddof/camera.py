"""Thin-lens camera: circle-of-confusion math, zone of focus, projections.

The camera sits at `position` looking along `forward`; the sensor plane is
conceptually behind the lens but all math is expressed in front-of-lens
view space (z = distance along `forward`, meters). CoC diameters are
reported in full-resolution pixels.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

SQRT2 = math.sqrt(2.0)

NEAR_FIELD = -1
IN_FOCUS = 0
FAR_FIELD = 1


def _normalize(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero-length vector")
    return v / n


@dataclass(frozen=True)
class ThinLensCamera:
    """Pose plus the five lens/sensor quantities that drive the effect.

    aperture is the lens diameter in meters (0 = pinhole), focal_length and
    focus_distance in meters, sensor_width in meters, image size in pixels.
    """

    position: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    aperture: float
    focal_length: float
    focus_distance: float
    sensor_width: float
    width: int
    height: int
    right: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ValueError("focal_length must be > 0")
        if self.focus_distance <= self.focal_length:
            raise ValueError("focus_distance must exceed focal_length")
        if self.aperture < 0:
            raise ValueError("aperture must be >= 0")
        if self.sensor_width <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("sensor/image dimensions must be positive")
        fwd = _normalize(self.forward)
        upv = np.asarray(self.up, dtype=np.float64)
        right = np.cross(upv, fwd)  # screen-right; (right, up, fwd) right-handed
        n = np.linalg.norm(right)
        if n < 1e-9:
            raise ValueError("up is parallel to forward")
        right /= n
        upv = np.cross(fwd, right)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "up", upv)
        object.__setattr__(self, "right", right)

    @classmethod
    def look_at(cls, position, target, up=(0.0, 1.0, 0.0), **kw):
        position = np.asarray(position, dtype=np.float64)
        return cls(position=position, forward=np.asarray(target, dtype=np.float64) - position, up=up, **kw)

    @property
    def tan_half_fov(self):
        return 0.5 * self.sensor_width / self.focal_length

    @property
    def px_per_meter_at_sensor(self):
        return self.width / self.sensor_width

    def with_params(self, **kw):
        return replace(self, **kw)

    # -- screen <-> ray -------------------------------------------------

    def pixel_dirs(self, xs, ys, jitter=(0.0, 0.0)):
        """World-space unit directions through (possibly fractional) pixels.

        xs, ys are pixel indices (arrays broadcast together); jitter is a
        subpixel offset in [-0.5, 0.5]^2 applied uniformly.
        """
        th = self.tan_half_fov
        u = ((np.asarray(xs, np.float64) + 0.5 + jitter[0]) / self.width * 2.0 - 1.0) * th
        v = (1.0 - (np.asarray(ys, np.float64) + 0.5 + jitter[1]) / self.height * 2.0) * th * (self.height / self.width)
        d = u[..., None] * self.right + v[..., None] * self.up + self.forward
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, points):
        """World points -> (x_px, y_px, view_z). Points behind the eye get z <= 0."""
        rel = np.asarray(points, dtype=np.float64) - self.position
        z = rel @ self.forward
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (rel @ self.right) / z / self.tan_half_fov
            v = (rel @ self.up) / z / (self.tan_half_fov * self.height / self.width)
        x = (u + 1.0) * 0.5 * self.width - 0.5
        y = (1.0 - v) * 0.5 * self.height - 0.5
        return x, y, z

    def lens_point(self, lx, ly):
        """World position of a lens-plane sample (lx, ly in meters)."""
        return self.position + np.multiply.outer(lx, self.right) + np.multiply.outer(ly, self.up)


# -- circle of confusion ------------------------------------------------


def coc_diameter_px(z, cam: ThinLensCamera):
    """Thin-lens CoC diameter at view depth z, in full-res pixels.

    c(z) = a*f*|z-d| / (z*(d-f)) * (w_i / w_s); +inf depth takes the
    finite limit a*f/(d-f) * (w_i/w_s).
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth must be positive")
    a, f, d = cam.aperture, cam.focal_length, cam.focus_distance
    scale = cam.width / cam.sensor_width
    with np.errstate(invalid="ignore"):
        c = a * f * np.abs(z - d) / (z * (d - f)) * scale
    limit = a * f / (d - f) * scale
    c = np.where(np.isinf(z), limit, c)
    return c if c.ndim else float(c)


@dataclass(frozen=True)
class FocusZone:
    z_near: float
    z_far: float

    def contains(self, z):
        return (z >= self.z_near) & (z <= self.z_far)


def zone_of_focus(cam: ThinLensCamera) -> FocusZone:
    """Depth interval where the CoC stays under one pixel diagonal (sqrt 2).

    Bounds are a*f*d / (a*f +- sqrt(2)*(d-f)*w_s/w_i); when the minus-side
    denominator is not positive the far bound is +inf.
    """
    a, f, d = cam.aperture, cam.focal_length, cam.focus_distance
    k = SQRT2 * (d - f) * cam.sensor_width / cam.width
    z_near = a * f * d / (a * f + k)
    denom = a * f - k
    z_far = a * f * d / denom if denom > 0 else math.inf
    return FocusZone(z_near, z_far)


def classify_field(z, cam: ThinLensCamera):
    """NEAR_FIELD / IN_FOCUS / FAR_FIELD per depth; +inf is far field."""
    zone = zone_of_focus(cam)
    z = np.asarray(z, dtype=np.float64)
    out = np.where(z < zone.z_near, NEAR_FIELD, np.where(z > zone.z_far, FAR_FIELD, IN_FOCUS))
    return out if out.ndim else int(out)


def field_split_weight(z, cam: ThinLensCamera, epsilon_band: float):
    """Near-field weight of a depth sample, ramping 1 -> 0 across d +- eps."""
    if epsilon_band <= 0:
        raise ValueError("epsilon_band must be > 0")
    z = np.asarray(z, dtype=np.float64)
    d = cam.focus_distance
    w = np.clip((d + epsilon_band - z) / (2.0 * epsilon_band), 0.0, 1.0)
    w = np.where(np.isinf(z), 0.0, w)
    return w if w.ndim else float(w)
