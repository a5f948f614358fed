"""Benchmark the compiled traversal core against the numpy fallback.

Run as `python -m hybriddof.bench`. Reports ray throughput for each
available backend on a bundled fixture, plus one full hybrid frame.
"""

import argparse
import time

import numpy as np

from . import backend
from .bvh import build_bvh, intersect_rays
from .pipeline import Pipeline, PipelineConfig, bundled_scene_path
from .scene import load_scene


def bench_rays(scene_name="occluder", n_rays=200_000, repeats=3):
    scene = load_scene(bundled_scene_path(scene_name))
    bvh = build_bvh(scene)
    rng = np.random.default_rng(7)
    origins = rng.normal(size=(n_rays, 3)) * 0.2
    dirs = rng.normal(size=(n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rows = []
    for impl in backend.available_backends():
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            intersect_rays(bvh, origins, dirs, impl=impl)
            best = min(best, time.perf_counter() - t0)
        rows.append((impl, n_rays / best / 1e6))
    return rows


def bench_frame(scene_name="occluder", frames=3):
    rows = []
    for impl in backend.available_backends():
        saved = backend._impl
        backend._impl = backend.resolve(impl)
        try:
            scene = load_scene(bundled_scene_path(scene_name))
            pipe = Pipeline(scene, PipelineConfig(width=160, height=90))
            t0 = time.perf_counter()
            for _ in range(frames):
                pipe.step()
            rows.append((impl, (time.perf_counter() - t0) / frames * 1e3))
        finally:
            backend._impl = saved
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scene", default="occluder")
    ap.add_argument("--rays", type=int, default=200_000)
    args = ap.parse_args(argv)

    print(f"active backend: {backend.BACKEND}")
    print(f"\nray throughput ({args.rays} rays, {args.scene}):")
    for impl, mrays in bench_rays(args.scene, args.rays):
        print(f"  {impl:8s} {mrays:8.2f} Mray/s")
    print("\nhybrid frame time (160x90):")
    for impl, ms in bench_frame(args.scene):
        print(f"  {impl:8s} {ms:8.1f} ms/frame")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
