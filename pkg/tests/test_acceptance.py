"""Acceptance criteria, one test per criterion, at the stated tolerances.

Everything runs on the bundled procedural fixtures at 320x180. Each test
prints a single [ACCEPT] pass line with its measured numbers (run with
`pytest tests/test_acceptance.py -v -s` to see them).
"""

import time

import numpy as np
import pytest

from hybriddof.bvh import build_bvh, intersect_brute, intersect_rays
from hybriddof.camera import coc_diameter_px
from hybriddof.metrics import psnr, ssim
from hybriddof.pipeline import PipelineConfig, open_pipeline
from hybriddof.raymask import ray_count

W, H = 320, 180
SEED = 0


def accept(name, detail):
    print(f"[ACCEPT] {name}: PASS ({detail})")


def run_frames(scene, frames, collect=(), **cfg):
    params = dict(width=W, height=H, seed=SEED, workers=4)
    params.update(cfg)
    pipe = open_pipeline(scene, PipelineConfig(**params))
    res = None
    for _ in range(frames):
        res = pipe.step(collect=collect)
    return res, pipe


@pytest.fixture(scope="module")
def occluder_gt():
    res, pipe = run_frames("occluder", 1, mode="ground-truth", gt_spp=256)
    return res.image, pipe.camera_at(0)


@pytest.fixture(scope="module")
def silhouette_band(occluder_gt):
    _, cam = occluder_gt
    coc = coc_diameter_px(0.8, cam)  # bar depth from the fixture
    assert coc >= 15.0  # fixture sized so the silhouette CoC is >= 15 px
    edge_px, _, _ = cam.project(np.array([[-0.06, 0.0, 0.8]]))  # bar's right edge
    c0 = int(edge_px[0] - coc)
    c1 = int(edge_px[0] + coc) + 1
    return slice(0, H), slice(c0, c1)


def clip01(img):
    return np.clip(img, 0.0, 1.0)


class TestSemiTransparencySuperiority:
    def test_hybrid_beats_post_only_on_silhouette_band(self, occluder_gt, silhouette_band):
        t0 = time.monotonic()
        gt, _ = occluder_gt
        hybrid, _ = run_frames("occluder", 50, mode="hybrid", rays_max=10)
        post, _ = run_frames("occluder", 20, mode="post-only")
        s_h = ssim(clip01(hybrid.image[silhouette_band]), clip01(gt[silhouette_band]))
        s_p = ssim(clip01(post.image[silhouette_band]), clip01(gt[silhouette_band]))
        elapsed = time.monotonic() - t0
        assert s_h - s_p >= 0.01
        assert elapsed <= 300.0
        accept(
            "semi-transparency superiority",
            f"band SSIM hybrid={s_h:.4f} post={s_p:.4f} margin={s_h - s_p:+.4f}, {elapsed:.0f}s",
        )


class TestSsimBudgetTrend:
    def test_ssim_non_decreasing_with_diminishing_returns(self, occluder_gt, silhouette_band):
        gt, _ = occluder_gt
        vals = []
        for m in (1, 4, 10):
            res, _ = run_frames("occluder", 12, mode="hybrid", rays_max=m)
            vals.append(ssim(clip01(res.image[silhouette_band]), clip01(gt[silhouette_band])))
        d1 = vals[1] - vals[0]
        d2 = vals[2] - vals[1]
        assert d1 >= -0.005 and d2 >= -0.005  # non-decreasing within slack
        assert d2 < d1  # diminishing returns
        accept(
            "ssim-vs-budget trend",
            f"SSIM(m=1,4,10)={vals[0]:.4f},{vals[1]:.4f},{vals[2]:.4f} "
            f"d(1->4)={d1:+.4f} d(4->10)={d2:+.4f}",
        )


class TestPinholeDegeneracy:
    def test_zero_aperture_matches_sharp(self):
        imgs = {}
        for mode in ("hybrid", "sharp"):
            pipe = open_pipeline(
                "occluder",
                PipelineConfig(width=W, height=H, seed=SEED, mode=mode, workers=4,
                               taa_sharp=False, taa_post=False, taa_final=False, jitter=False),
            )
            pipe.set_scene_params(aperture=0.0)
            for _ in range(3):
                res = pipe.step()
            imgs[mode] = res.image
        value = psnr(clip01(imgs["hybrid"]), clip01(imgs["sharp"]))
        assert value >= 40.0
        accept("pinhole degeneracy", f"PSNR={value if np.isfinite(value) else 'inf'} dB")


class TestConstantPreservation:
    @pytest.mark.parametrize("fixture", ["flat_far", "flat_near"])
    def test_constant_scene_stays_constant(self, fixture):
        res, _ = run_frames(fixture, 5, mode="hybrid")
        worst = max(float(np.ptp(res.image[..., c])) for c in range(3))
        assert worst <= 1e-3
        accept(f"constant preservation ({fixture})", f"max per-channel spread={worst:.2e}")


class TestEmaConvergence:
    def test_static_accumulation_error_bound(self):
        pipe = open_pipeline(
            "flat_near",
            PipelineConfig(width=W, height=H, seed=SEED, workers=4,
                           taa_sharp=False, taa_post=False, taa_final=False, jitter=False),
        )
        pipe.step()  # converged immediately: constant scene, cold-start copy
        converged = pipe.temporal_state.near_rgb.copy()
        offset = 0.4
        pipe.temporal_state.near_rgb = converged + offset  # inject wrong history
        checks = {}
        for n in range(1, 51):
            pipe.step()
            if n in (10, 50):
                err = np.abs(pipe.temporal_state.near_rgb - converged).max()
                bound = 0.95**n * offset + 0.01
                assert err <= bound, f"frame {n}: {err} > {bound}"
                checks[n] = (err, bound)
        accept(
            "EMA convergence",
            " ".join(f"n={n}: err={e:.4f}<=bound={b:.4f}" for n, (e, b) in checks.items()),
        )


class TestRayBudgetLaw:
    def test_counts_bounded_and_monotone(self):
        rng = np.random.default_rng(3)
        m = 10
        n = 100
        delta_d = rng.random(n) * 50
        delta_n = rng.random(n) * 50
        sigma = rng.random(n) * 2e-5
        near = rng.random(n) > 0.5
        counts = ray_count(delta_d, delta_n, 0.8, sigma, m, near)
        assert np.all((counts >= 0) & (counts <= m))
        # monotone in sigma^2, everything else fixed
        for i in range(n):
            lo = ray_count(delta_d[i : i + 1], delta_n[i : i + 1], 0.8, sigma[i : i + 1], m, near[i : i + 1])
            hi = ray_count(delta_d[i : i + 1], delta_n[i : i + 1], 0.8, sigma[i : i + 1] * 3 + 1e-6, m, near[i : i + 1])
            assert hi[0] >= lo[0]
        # per-frame total bounded by budget * pixels
        res, pipe = run_frames("fg_closeup", 3, mode="hybrid", rays_max=m)
        h2 = (H + 1) // 2
        w2 = (W + 1) // 2
        assert res.total_rays <= m * h2 * w2
        accept(
            "ray budget law",
            f"100 random inputs in [0,{m}], monotone; frame total {res.total_rays} <= {m * h2 * w2}",
        )


class TestBvhOracle:
    def test_random_rays_match_brute_force(self, sphere_scene, sphere_bvh):
        rng = np.random.default_rng(0)
        n = 10_000
        origins = rng.normal(size=(n, 3)) * 3.0
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t, pid, _, _ = intersect_rays(sphere_bvh, origins, dirs)
        tb, pb, _, _ = intersect_brute(sphere_scene, origins, dirs)
        assert np.array_equal(pid, pb)
        hit = pb >= 0
        assert np.all(np.abs(t[hit] - tb[hit]) <= 1e-6 * tb[hit])
        accept("BVH oracle", f"{n} rays, {int(hit.sum())} hits, prim ids equal, |dt|<=1e-6*t")


class TestDeterminism:
    def test_identical_outputs_across_worker_counts(self):
        images = {}
        for workers in (1, 4):
            res, _ = run_frames("occluder", 3, mode="hybrid", workers=workers)
            images[workers] = res.image
        assert np.array_equal(images[1], images[4])
        res_again, _ = run_frames("occluder", 3, mode="hybrid", workers=4)
        assert np.array_equal(images[4], res_again.image)
        accept("determinism & schedule invariance", "workers {1,4} bitwise identical; rerun identical")


class TestTimingTrends:
    def _rt_ms(self, scene, m, frames=14, warmup=3):
        pipe = open_pipeline(
            scene, PipelineConfig(width=W, height=H, seed=SEED, workers=4, rays_max=m)
        )
        times = []
        for i in range(frames):
            res = pipe.step()
            if i >= warmup:
                times.append(res.passes_ms["ray_trace"])
        # min-of-N: scheduler noise only ever adds time
        return float(np.min(times))

    def test_fg_strictly_increasing_bg_flat(self):
        fg = [self._rt_ms("fg_closeup", m) for m in (1, 10, 30)]
        assert fg[0] < fg[1] < fg[2]
        bg = [self._rt_ms("bg_wide", m) for m in (1, 10, 30)]
        variation = (max(bg) - min(bg)) / np.mean(bg)
        assert variation < 0.20
        # absolute milliseconds deliberately not compared to any reference
        accept(
            "timing trends",
            f"FG rt ms {fg[0]:.1f}<{fg[1]:.1f}<{fg[2]:.1f}; BG variation {variation:.1%} < 20%",
        )
