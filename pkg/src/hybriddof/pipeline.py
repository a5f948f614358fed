"""Frame-loop orchestration: configuration, camera paths, pass wiring.

One Pipeline instance owns the scene, BVH, temporal state, and TAA
histories; step() renders the next frame under the current parameter
snapshot. Batch timing is simulated (fixed dt), so camera paths are
machine-independent; wall-clock is only measured for the per-pass report.
"""

import importlib.resources as resources
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from . import composite as composite_mod
from . import postdof, raymask, reconstruct, rtdof, taa, temporal
from .camera import ThinLensCamera
from .imgops import box_down2, upsample2_bilinear
from .metrics import PassTimer, ground_truth_dof
from .scene import SceneError, load_scene
from .bvh import build_bvh
from .visibility import compute_motion_vectors, render_visibility

MODES = ("hybrid", "post-only", "rt-only", "ground-truth", "sharp")


@dataclass
class PipelineConfig:
    width: int = 320
    height: int = 180
    mode: str = "hybrid"
    rays_max: int = 10  # m
    edge_scale: float = 0.8  # s
    epsilon_band_frac: float = 0.05  # near/far transition half-width, as a fraction of d
    blend_accum: float = 0.95
    blend_motion: float = 0.8
    motion_threshold: float = 0.5
    taa_blend: float = 0.9
    taa_sharp: bool = True
    taa_post: bool = True
    taa_final: bool = True
    jitter: bool = True
    specular_threshold: float = 1.0
    depth_range: float = 0.1
    gt_spp: int = 256
    seed: int = 0
    workers: int = 1
    dt: float = 1.0 / 60.0
    camera_path: str = None

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")
        if self.rays_max < 0:
            raise ValueError("rays_max must be >= 0")
        if not 0.0 <= self.edge_scale <= 1.0:
            raise ValueError("edge_scale must be in [0, 1]")
        if self.epsilon_band_frac <= 0:
            raise ValueError("epsilon_band_frac must be > 0")
        for name in ("blend_accum", "blend_motion", "taa_blend"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.gt_spp < 1:
            raise ValueError("gt_spp must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"config: unknown field(s) {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def from_yaml(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        return cls.from_dict(doc)

    def updated(self, **kw):
        return replace(self, **kw).validate()


@dataclass
class CameraPath:
    """Linearly interpolated keyframes (strictly increasing times)."""

    keyframes: list  # of dicts: time, position, look_at, up?, focus_distance?, aperture?

    def __post_init__(self):
        times = [k["time"] for k in self.keyframes]
        if not times:
            raise ValueError("camera path needs at least one keyframe")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")

    @classmethod
    def from_yaml(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        return cls(keyframes=doc["keyframes"])

    def at(self, t):
        ks = self.keyframes
        if t <= ks[0]["time"]:
            return dict(ks[0])
        if t >= ks[-1]["time"]:
            return dict(ks[-1])
        for a, b in zip(ks, ks[1:]):
            if a["time"] <= t <= b["time"]:
                f = (t - a["time"]) / (b["time"] - a["time"])
                out = {}
                for key in set(a) | set(b):
                    if key == "time":
                        continue
                    va, vb = a.get(key), b.get(key)
                    if va is None or vb is None:
                        out[key] = va if vb is None else vb
                    elif isinstance(va, (int, float)):
                        out[key] = va + (vb - va) * f
                    else:
                        out[key] = [x + (y - x) * f for x, y in zip(va, vb)]
                return out
        raise AssertionError("unreachable")


@dataclass
class FrameResult:
    index: int
    image: np.ndarray
    passes_ms: dict
    total_rays: int
    params: dict
    aux: dict = field(default_factory=dict)


def bundled_scene_path(name):
    """Path of a fixture shipped with the package (name without extension)."""
    ref = resources.files("hybriddof") / "scenes" / f"{name}.yaml"
    return str(ref)


class Pipeline:
    def __init__(self, scene, config: PipelineConfig, camera_path: CameraPath = None):
        config.validate()
        self.scene = scene
        self.cfg = config
        self.bvh = build_bvh(scene)
        self.path = camera_path
        if camera_path is None and config.camera_path:
            self.path = CameraPath.from_yaml(config.camera_path)
        self.frame_index = 0
        h2, w2 = (config.height + 1) // 2, (config.width + 1) // 2
        self.temporal_state = temporal.TemporalState.empty(h2, w2)
        self.taa_sharp_state = taa.TaaState()
        self.taa_post_state = taa.TaaState()
        self.taa_final_state = taa.TaaState()
        self.prev_camera = None
        self._gt_cache = {}
        self.timer = PassTimer()

    # -- camera ---------------------------------------------------------

    def camera_at(self, frame_index) -> ThinLensCamera:
        base = dict(self.scene.camera_defaults)
        if self.path is not None:
            base.update(self.path.at(frame_index * self.cfg.dt))
        pos = base.get("position", (0.0, 0.0, 0.0))
        look = base.get("look_at", (0.0, 0.0, 1.0))
        return ThinLensCamera.look_at(
            pos,
            look,
            up=tuple(base.get("up", (0.0, 1.0, 0.0))),
            aperture=float(base.get("aperture", 0.0)),
            focal_length=float(base.get("focal_length", 0.05)),
            focus_distance=float(base.get("focus_distance", 2.0)),
            sensor_width=float(base.get("sensor_width", 0.036)),
            width=self.cfg.width,
            height=self.cfg.height,
        )

    def set_scene_params(self, **kw):
        """Live updates (aperture, focus_distance, ...) between frames."""
        self.scene.camera_defaults.update(kw)

    # -- frame ------------------------------------------------------------

    def step(self, collect=()) -> FrameResult:
        cfg = self.cfg
        timer = self.timer
        timer.frame_start()
        frame = self.frame_index
        cam = self.camera_at(frame)
        cam_prev = self.prev_camera if self.prev_camera is not None else cam
        eps_band = cfg.epsilon_band_frac * cam.focus_distance
        jitter = taa.halton_jitter(frame) if cfg.jitter else (0.0, 0.0)
        aux = {}

        if cfg.mode == "ground-truth":
            with timer.section("ray_trace"):
                img = self._ground_truth(cam)
            self.prev_camera = cam
            self.frame_index += 1
            return FrameResult(frame, img, timer.frame_report(), 0, self._params(cam))

        with timer.section("rasterization"):
            gb, sharp = render_visibility(self.scene, self.bvh, cam, jitter, workers=cfg.workers)
            compute_motion_vectors(gb, cam, cam_prev)
            sharp_in = sharp
            if cfg.taa_sharp and cfg.mode != "sharp":
                sharp_in = taa.taa_resolve(sharp, self.taa_sharp_state, gb.motion, cfg.taa_blend)

        if cfg.mode == "sharp":
            final = sharp
            self.prev_camera = cam
            self.frame_index += 1
            return FrameResult(
                frame, final, timer.frame_report(), 0, self._params(cam), self._aux(collect, locals())
            )

        motion_half = box_down2(gb.motion) * 0.5

        # post-process branch
        with timer.section("post_process"):
            layer = postdof.downscale_half(sharp_in, gb, cam)
            tiles = postdof.tile_max_coc(layer)
            pre = postdof.prefilter9(layer, tiles)
            post = postdof.mainfilter81(
                pre, tiles, specular_threshold=cfg.specular_threshold, depth_range=cfg.depth_range
            )
            stack = np.concatenate(
                [
                    post.near,
                    post.far,
                    post.combined,
                    post.near_alpha[..., None],
                    post.far_alpha[..., None],
                    post.bokeh[..., None],
                ],
                axis=-1,
            )
            stack = postdof.median3x3(stack)
            if cfg.taa_post:
                stack = taa.taa_resolve(stack, self.taa_post_state, motion_half, cfg.taa_blend)

        rt_up = {
            "rgb": np.zeros((cfg.height, cfg.width, 3)),
            "h": np.zeros((cfg.height, cfg.width)),
            "data_w": np.zeros((cfg.height, cfg.width)),
        }
        total_rays = 0
        if cfg.mode in ("hybrid", "rt-only"):
            with timer.section("gbuffer_sigma_blur"):
                mask = raymask.build_mask(
                    gb, cam, layer.depth, self.temporal_state.variance, cfg.edge_scale, cfg.rays_max
                )
            with timer.section("ray_trace"):
                fieldbuf = rtdof.trace_frame(
                    mask, self.scene, self.bvh, cam, eps_band, cfg.seed, frame,
                    jitter=jitter, workers=cfg.workers,
                )
                total_rays = fieldbuf.total_rays
            with timer.section("accumulation"):
                near_fetch, near_valid = temporal.reproject_near(
                    self.temporal_state, motion_half, layer.depth
                )
                far_fetch, far_valid = temporal.reproject_far(self.temporal_state, fieldbuf, cam_prev)
                mmag = np.hypot(motion_half[..., 0], motion_half[..., 1])
                (state, merged, merged_coc, h_acc, data_w, a_s, dead_s) = temporal.accumulate(
                    fieldbuf, self.temporal_state, near_fetch, near_valid, far_fetch, far_valid,
                    mmag, layer.depth, cfg.blend_accum, cfg.blend_motion, cfg.motion_threshold,
                )
                temporal.update_variance(merged, state, near_fetch, a_s, dead_s)
                self.temporal_state = state
            with timer.section("median"):
                merged_med = postdof.median3x3(merged)
            with timer.section("recon_composite"):
                recon_rgb, recon_h = reconstruct.gather_reconstruct(
                    merged_med, merged_coc, state.variance, h_acc, median_first=False
                )
                rt_up = {
                    "rgb": upsample2_bilinear(recon_rgb, cfg.width, cfg.height),
                    "h": upsample2_bilinear(recon_h, cfg.width, cfg.height),
                    "data_w": upsample2_bilinear(data_w, cfg.width, cfg.height),
                }
        with timer.section("recon_composite"):
            post_up_stack = upsample2_bilinear(stack, cfg.width, cfg.height)
            post_up = {
                "near": post_up_stack[..., 0:3],
                "far": post_up_stack[..., 3:6],
                "combined": post_up_stack[..., 6:9],
                "near_alpha": post_up_stack[..., 9],
                "far_alpha": post_up_stack[..., 10],
                "bokeh": post_up_stack[..., 11],
            }
            image = composite_mod.composite_frame(sharp_in, gb, cam, post_up, rt_up, mode=cfg.mode)

        if cfg.taa_final:
            with timer.section("final_taa"):
                image = taa.taa_resolve(image, self.taa_final_state, gb.motion, cfg.taa_blend)

        self.prev_camera = cam
        self.frame_index += 1
        return FrameResult(
            frame, image, timer.frame_report(), total_rays, self._params(cam),
            self._aux(collect, locals()),
        )

    def _ground_truth(self, cam):
        key = (
            tuple(np.round(cam.position, 9)),
            tuple(np.round(cam.forward, 9)),
            cam.aperture,
            cam.focus_distance,
            self.cfg.gt_spp,
        )
        if key not in self._gt_cache:
            self._gt_cache.clear()
            self._gt_cache[key] = ground_truth_dof(
                self.scene, self.bvh, cam, self.cfg.gt_spp, self.cfg.seed, self.cfg.workers
            )
        return self._gt_cache[key]

    def _params(self, cam):
        return {
            "mode": self.cfg.mode,
            "m": self.cfg.rays_max,
            "s": self.cfg.edge_scale,
            "aperture": cam.aperture,
            "focal_length": cam.focal_length,
            "focus_distance": cam.focus_distance,
            "seed": self.cfg.seed,
        }

    _AUX_KEYS = {
        "gbuffer-depth": lambda L: L["gb"].depth,
        "gbuffer-normal": lambda L: L["gb"].normal,
        "gbuffer-albedo": lambda L: L["gb"].albedo,
        "gbuffer-specular": lambda L: L["gb"].specular,
        "motion": lambda L: L["gb"].motion,
        "sharp": lambda L: L["sharp"],
        "half-color": lambda L: L["layer"].color,
        "half-coc": lambda L: L["layer"].coc_radius,
        "tiles": lambda L: L["tiles"].tiles,
        "post-near": lambda L: L["post"].near,
        "post-far": lambda L: L["post"].far,
        "post-combined": lambda L: L["post"].combined,
        "bokeh": lambda L: L["post"].bokeh,
        "raymask": lambda L: L["mask"].counts.astype(np.float64) / max(L["mask"].budget, 1),
        "rt-near": lambda L: L["fieldbuf"].near_rgb,
        "rt-far": lambda L: L["fieldbuf"].far_rgb,
        "hit-ratio": lambda L: L["h_acc"],
        "variance": lambda L: L["state"].variance,
        "merged": lambda L: L["merged"],
        "reconstructed": lambda L: L["recon_rgb"],
    }

    def _aux(self, collect, frame_locals):
        out = {}
        for name in collect:
            getter = self._AUX_KEYS.get(name)
            if getter is None:
                continue
            try:
                out[name] = np.array(getter(frame_locals), copy=True)
            except KeyError:
                continue
        return out

    @staticmethod
    def pass_dump_names():
        return sorted(Pipeline._AUX_KEYS)


def open_pipeline(scene_path, config: PipelineConfig) -> Pipeline:
    if not os.path.exists(scene_path):
        bundled = bundled_scene_path(scene_path)
        if os.path.exists(bundled):
            scene_path = bundled
        else:
            raise SceneError(f"scene file not found: {scene_path}")
    scene = load_scene(scene_path)
    return Pipeline(scene, config)
