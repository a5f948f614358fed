"""Live session host: frames out, parameter updates in, over WebSocket.

One control connection at a time. The render loop and the message drain
share the connection handler thread: all queued updates are applied at a
frame boundary, the frame renders under that snapshot, then the frame
payload is pushed. Frame payloads are binary (width u32, height u32, RGB8
rows, then a JSON metadata record); control messages and acks are JSON
text. Bind address comes from HYBRIDDOF_BIND (default loopback).
"""

import json
import os
import struct
import threading
import time

import numpy as np

from .cli import tonemap8

_CAMERA_PARAMS = {
    "aperture": (0.0, 0.5),
    "focal_length": (1e-4, 0.5),
    "focus_distance": (1e-3, 1e3),
    "sensor_width": (1e-3, 1.0),
}
_CONFIG_PARAMS = {
    "m": ("rays_max", int, 0, 1000),
    "rays_max": ("rays_max", int, 0, 1000),
    "s": ("edge_scale", float, 0.0, 1.0),
    "edge_scale": ("edge_scale", float, 0.0, 1.0),
    "epsilon_band_frac": ("epsilon_band_frac", float, 1e-6, 1.0),
    "blend_accum": ("blend_accum", float, 0.0, 0.999),
    "blend_motion": ("blend_motion", float, 0.0, 0.999),
    "taa_blend": ("taa_blend", float, 0.0, 0.999),
    "specular_threshold": ("specular_threshold", float, 0.0, 1e3),
    "taa_sharp": ("taa_sharp", bool, None, None),
    "taa_post": ("taa_post", bool, None, None),
    "taa_final": ("taa_final", bool, None, None),
    "jitter": ("jitter", bool, None, None),
}


def encode_frame(image, meta):
    h, w = image.shape[:2]
    rgb = tonemap8(image)
    return struct.pack("<II", w, h) + rgb.tobytes() + json.dumps(meta).encode("utf-8")


def decode_frame(payload):
    """Inverse of encode_frame; used by tests and kept with the schema."""
    w, h = struct.unpack_from("<II", payload, 0)
    off = 8
    n = w * h * 3
    rgb = np.frombuffer(payload[off : off + n], dtype=np.uint8).reshape(h, w, 3)
    meta = json.loads(payload[off + n :].decode("utf-8"))
    return rgb, meta


class Session:
    """Message handling + render stepping for one connection."""

    def __init__(self, pipeline):
        self.pipe = pipeline
        self.paused = False
        self.dump_requests = []

    def handle_message(self, raw):
        """-> reply dict (ack or error). Malformed input never kills the session."""
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return {"kind": "error", "message": f"malformed message: {exc}"}
        kind = msg.get("kind")
        effective = self.pipe.frame_index
        if kind == "setParam":
            return self._set_param(msg.get("name"), msg.get("value"), effective)
        if kind == "setCamera":
            pose = {}
            for key in ("position", "look_at", "up"):
                if key in msg:
                    v = msg[key]
                    if not (isinstance(v, (list, tuple)) and len(v) == 3):
                        return {"kind": "error", "message": f"setCamera.{key}: expected 3-vector"}
                    pose[key] = [float(c) for c in v]
            if not pose:
                return {"kind": "error", "message": "setCamera: empty pose"}
            self.pipe.set_scene_params(**pose)
            return {"kind": "ack", "of": "setCamera", "effectiveFrame": effective}
        if kind == "setMode":
            mode = msg.get("mode")
            try:
                self.pipe.cfg = self.pipe.cfg.updated(mode=mode)
            except ValueError as exc:
                return {"kind": "error", "message": str(exc), "param": "mode"}
            return {"kind": "ack", "of": "setMode", "mode": mode, "effectiveFrame": effective}
        if kind == "requestPassDump":
            name = msg.get("name")
            if name not in self.pipe.pass_dump_names():
                return {
                    "kind": "error",
                    "message": f"unknown pass {name!r}",
                    "allowed": self.pipe.pass_dump_names(),
                }
            self.dump_requests.append(name)
            return {"kind": "ack", "of": "requestPassDump", "name": name, "effectiveFrame": effective}
        if kind == "pause":
            self.paused = True
            return {"kind": "ack", "of": "pause", "effectiveFrame": effective}
        if kind == "resume":
            self.paused = False
            return {"kind": "ack", "of": "resume", "effectiveFrame": effective}
        return {"kind": "error", "message": f"unknown message kind {kind!r}"}

    def _set_param(self, name, value, effective):
        if name in _CAMERA_PARAMS:
            lo, hi = _CAMERA_PARAMS[name]
            try:
                v = float(value)
            except (TypeError, ValueError):
                return {"kind": "error", "message": "value must be a number", "param": name}
            if not lo <= v <= hi:
                return {
                    "kind": "error",
                    "message": f"{name} out of range",
                    "param": name,
                    "allowed": [lo, hi],
                }
            self.pipe.set_scene_params(**{name: v})
            return {"kind": "ack", "of": "setParam", "param": name, "value": v, "effectiveFrame": effective}
        if name in _CONFIG_PARAMS:
            field, typ, lo, hi = _CONFIG_PARAMS[name]
            try:
                v = typ(value)
            except (TypeError, ValueError):
                return {"kind": "error", "message": f"value must be {typ.__name__}", "param": name}
            if lo is not None and not lo <= v <= hi:
                return {
                    "kind": "error",
                    "message": f"{name} out of range",
                    "param": name,
                    "allowed": [lo, hi],
                }
            try:
                self.pipe.cfg = self.pipe.cfg.updated(**{field: v})
            except ValueError as exc:
                return {"kind": "error", "message": str(exc), "param": name}
            return {"kind": "ack", "of": "setParam", "param": name, "value": v, "effectiveFrame": effective}
        return {"kind": "error", "message": f"unknown param {name!r}", "param": name}

    def render_frame(self):
        collect = tuple(dict.fromkeys(self.dump_requests))
        self.dump_requests = []
        res = self.pipe.step(collect=collect)
        meta = {
            "kind": "frame",
            "frameIndex": res.index,
            "mode": res.params["mode"],
            "params": res.params,
            "passesMs": {k: round(v, 4) for k, v in res.passes_ms.items()},
            "totalRays": res.total_rays,
        }
        msgs = [encode_frame(res.image, meta)]
        for name, buf in res.aux.items():
            arr = np.asarray(buf, dtype=np.float64)
            if arr.ndim == 2:
                arr = np.repeat(arr[..., None], 3, axis=-1)
            hi = float(arr.max())
            view = arr[..., :3] / hi if hi > 1.0 else arr[..., :3]
            msgs.append(
                encode_frame(view, {"kind": "passDump", "name": name, "frameIndex": res.index})
            )
        return msgs


def serve(pipeline, port=8765, host=None, ready_event=None, stop_event=None):
    """Blocking server; one client at a time, sequential reconnects allowed."""
    from websockets.exceptions import ConnectionClosed
    from websockets.sync.server import serve as ws_serve

    host = host or os.environ.get("HYBRIDDOF_BIND", "127.0.0.1")
    busy = threading.Lock()
    stop_event = stop_event or threading.Event()

    def handler(ws):
        if not busy.acquire(blocking=False):
            ws.close(1013, "another control connection is active")
            return
        try:
            session = Session(pipeline)
            while not stop_event.is_set():
                while True:
                    try:
                        raw = ws.recv(timeout=0)
                    except TimeoutError:
                        break
                    ws.send(json.dumps(session.handle_message(raw)))
                if session.paused:
                    time.sleep(0.02)
                    continue
                for payload in session.render_frame():
                    ws.send(payload)
        except ConnectionClosed:
            pass
        finally:
            busy.release()

    with ws_serve(handler, host, port) as server:
        if ready_event is not None:
            ready_event.set()
        threading.Thread(target=lambda: (stop_event.wait(), server.shutdown()), daemon=True).start()
        server.serve_forever()
    return 0
