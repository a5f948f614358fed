"""Batch entry point.

Renders N frames of a scene under a config, writing numbered PNGs (gamma
encoded), optional float32 dumps for golden tests, optional per-pass debug
images, and a JSONL metrics report. --serve hands the initialized pipeline
to the live control service instead.
"""

import argparse
import json
import os
import sys

import numpy as np

from .pipeline import MODES, Pipeline, PipelineConfig, open_pipeline


def tonemap8(img):
    """Linear float -> display bytes (clip + gamma 2.2)."""
    enc = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) ** (1.0 / 2.2)
    return (enc * 255.0 + 0.5).astype(np.uint8)


def save_png(img, path):
    from PIL import Image

    a = np.asarray(img)
    if a.ndim == 2:
        a = np.repeat(a[..., None], 3, axis=-1)
    if a.dtype != np.uint8:
        if a.ndim == 3 and a.shape[-1] > 3:
            a = a[..., :3]
        lo, hi = float(np.min(a)), float(np.max(a))
        if hi > 1.0 or lo < 0.0:  # normalize diagnostic channels for viewing
            a = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
        a = tonemap8(a)
    Image.fromarray(a).save(path)


def build_parser():
    p = argparse.ArgumentParser(prog="hybriddof", description=__doc__)
    p.add_argument("--scene", required=True, help="scene file or bundled fixture name")
    p.add_argument("--config", help="YAML config file (PipelineConfig fields)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int)
    p.add_argument("--rays-max", type=int, dest="rays_max")
    p.add_argument("--workers", type=int)
    p.add_argument("--dump-pass", action="append", default=[],
                   help="also write this intermediate buffer each frame (repeatable)")
    p.add_argument("--dump-float", action="store_true", help="write float32 .npy next to PNGs")
    p.add_argument("--metrics", help="append one JSON record per frame to this file")
    p.add_argument("--no-taa", action="store_true", help="disable all TAA stages and jitter")
    p.add_argument("--serve", action="store_true", help="run the live control service instead")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--list-passes", action="store_true")
    return p


def config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.from_yaml(args.config) if args.config else PipelineConfig()
    over = {}
    for name in ("mode", "seed", "rays_max", "workers"):
        v = getattr(args, name)
        if v is not None:
            over[name] = v
    if args.no_taa:
        over.update(taa_sharp=False, taa_post=False, taa_final=False, jitter=False)
    return cfg.updated(**over) if over else cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.list_passes:
        print("\n".join(Pipeline.pass_dump_names()))
        return 0
    try:
        cfg = config_from_args(args)
        pipe = open_pipeline(args.scene, cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.serve:
        from .service import serve

        return serve(pipe, port=args.port)

    os.makedirs(args.out, exist_ok=True)
    metrics_fh = open(args.metrics, "a", encoding="utf-8") if args.metrics else None
    try:
        for _ in range(args.frames):
            res = pipe.step(collect=tuple(args.dump_pass))
            stem = os.path.join(args.out, f"frame_{res.index:04d}")
            save_png(res.image, stem + ".png")
            if args.dump_float:
                np.save(stem + ".npy", res.image.astype(np.float32))
            for name, buf in res.aux.items():
                save_png(buf, f"{stem}_{name}.png")
                if args.dump_float:
                    np.save(f"{stem}_{name}.npy", buf.astype(np.float32))
            if metrics_fh:
                rec = {
                    "frame": res.index,
                    "mode": cfg.mode,
                    "m": cfg.rays_max,
                    "ssim": None,
                    "total_rays": res.total_rays,
                    "passes_ms": {k: round(v, 4) for k, v in res.passes_ms.items()},
                }
                metrics_fh.write(json.dumps(rec) + "\n")
        print(f"wrote {args.frames} frame(s) to {args.out}")
    finally:
        if metrics_fh:
            metrics_fh.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
