import json
import socket
import threading
import time

import numpy as np
import pytest

from hybriddof.pipeline import PipelineConfig, open_pipeline
from hybriddof.service import Session, decode_frame, encode_frame, serve


def make_session(**kw):
    params = dict(width=64, height=36, gt_spp=4)
    params.update(kw)
    return Session(open_pipeline("occluder", PipelineConfig(**params)))


class TestFrameCodec:
    def test_roundtrip(self):
        img = np.random.default_rng(0).random((9, 16, 3))
        meta = {"kind": "frame", "frameIndex": 3, "params": {"m": 10}}
        payload = encode_frame(img, meta)
        rgb, got = decode_frame(payload)
        assert rgb.shape == (9, 16, 3)
        assert got == meta
        # width u32 LE, height u32 LE head the payload
        assert payload[:4] == (16).to_bytes(4, "little")
        assert payload[4:8] == (9).to_bytes(4, "little")


class TestHandleMessage:
    def test_set_param_ack_carries_effective_frame(self):
        s = make_session()
        s.render_frame()
        reply = s.handle_message(json.dumps({"kind": "setParam", "name": "m", "value": 5}))
        assert reply["kind"] == "ack"
        assert reply["effectiveFrame"] == 1  # next frame to render
        assert s.pipe.cfg.rays_max == 5

    def test_set_param_range_error(self):
        s = make_session()
        reply = s.handle_message(json.dumps({"kind": "setParam", "name": "m", "value": -1}))
        assert reply["kind"] == "error"
        assert reply["param"] == "m"
        assert "allowed" in reply

    def test_unknown_param_named(self):
        s = make_session()
        reply = s.handle_message(json.dumps({"kind": "setParam", "name": "warp", "value": 1}))
        assert reply["kind"] == "error"
        assert "warp" in reply["message"]

    def test_set_mode(self):
        s = make_session()
        reply = s.handle_message(json.dumps({"kind": "setMode", "mode": "ground-truth"}))
        assert reply["kind"] == "ack"
        msgs = s.render_frame()
        _, meta = decode_frame(msgs[0])
        assert meta["mode"] == "ground-truth"

    def test_bad_mode(self):
        s = make_session()
        reply = s.handle_message(json.dumps({"kind": "setMode", "mode": "nope"}))
        assert reply["kind"] == "error"

    def test_malformed_json_survives(self):
        s = make_session()
        reply = s.handle_message(b"\xff{{{")
        assert reply["kind"] == "error"
        # session still renders
        assert s.render_frame()

    def test_pause_resume(self):
        s = make_session()
        assert s.handle_message(json.dumps({"kind": "pause"}))["kind"] == "ack"
        assert s.paused
        assert s.handle_message(json.dumps({"kind": "resume"}))["kind"] == "ack"
        assert not s.paused

    def test_pass_dump_request(self):
        s = make_session()
        bad = s.handle_message(json.dumps({"kind": "requestPassDump", "name": "nope"}))
        assert bad["kind"] == "error" and "raymask" in bad["allowed"]
        ok = s.handle_message(json.dumps({"kind": "requestPassDump", "name": "raymask"}))
        assert ok["kind"] == "ack"
        msgs = s.render_frame()
        kinds = [decode_frame(m)[1]["kind"] for m in msgs]
        assert kinds == ["frame", "passDump"]
        # one-shot: next frame has no dump
        assert len(s.render_frame()) == 1

    def test_set_camera(self):
        s = make_session()
        reply = s.handle_message(
            json.dumps({"kind": "setCamera", "position": [0.1, 0.0, 0.0], "look_at": [0.1, 0, 1]})
        )
        assert reply["kind"] == "ack"
        msgs = s.render_frame()
        _, meta = decode_frame(msgs[0])
        assert meta["kind"] == "frame"

    def test_frame_indices_strictly_increasing(self):
        s = make_session()
        indices = [decode_frame(s.render_frame()[0])[1]["frameIndex"] for _ in range(4)]
        assert indices == [0, 1, 2, 3]


def free_port():
    with socket.socket() as sk:
        sk.bind(("127.0.0.1", 0))
        return sk.getsockname()[1]


@pytest.fixture
def live_server():
    from websockets.sync.client import connect

    port = free_port()
    pipe = open_pipeline("occluder", PipelineConfig(width=64, height=36))
    ready = threading.Event()
    stop = threading.Event()
    th = threading.Thread(
        target=serve, args=(pipe,), kwargs=dict(port=port, ready_event=ready, stop_event=stop),
        daemon=True,
    )
    th.start()
    assert ready.wait(5.0)
    yield port, connect
    stop.set()
    th.join(timeout=5.0)


class TestLiveService:
    def recv_frame(self, ws, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            msg = ws.recv(timeout=timeout)
            if isinstance(msg, bytes):
                return decode_frame(msg)
        raise TimeoutError("no frame received")

    def test_stream_and_parameter_roundtrip(self, live_server):
        port, connect = live_server
        with connect(f"ws://127.0.0.1:{port}", max_size=16 * 1024 * 1024) as ws:
            rgb, meta = self.recv_frame(ws)
            assert rgb.shape == (36, 64, 3)
            first_index = meta["frameIndex"]
            assert meta["params"]["aperture"] > 0

            ws.send(json.dumps({"kind": "setParam", "name": "aperture", "value": 0.0}))
            # drain until the ack arrives, then look for its effective frame
            effective = None
            while effective is None:
                msg = ws.recv(timeout=10)
                if isinstance(msg, str):
                    reply = json.loads(msg)
                    assert reply["kind"] == "ack"
                    effective = reply["effectiveFrame"]
            while True:
                rgb, meta = self.recv_frame(ws)
                if meta["frameIndex"] >= effective:
                    break
            assert meta["params"]["aperture"] == 0.0
            assert meta["frameIndex"] > first_index

    def test_frame_indices_no_gaps(self, live_server):
        port, connect = live_server
        with connect(f"ws://127.0.0.1:{port}", max_size=16 * 1024 * 1024) as ws:
            seen = []
            for _ in range(3):
                _, meta = self.recv_frame(ws)
                seen.append(meta["frameIndex"])
            assert seen == list(range(seen[0], seen[0] + 3))

    def test_second_connection_rejected_then_reconnect_ok(self, live_server):
        port, connect = live_server
        with connect(f"ws://127.0.0.1:{port}", max_size=16 * 1024 * 1024) as ws:
            self.recv_frame(ws)
            with connect(f"ws://127.0.0.1:{port}") as ws2:
                got_close = False
                try:
                    for _ in range(5):
                        ws2.recv(timeout=5)
                except Exception:
                    got_close = True
                assert got_close
        time.sleep(0.3)
        with connect(f"ws://127.0.0.1:{port}", max_size=16 * 1024 * 1024) as ws3:
            _, meta = self.recv_frame(ws3)
            assert meta["kind"] == "frame"
