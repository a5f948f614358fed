// Browser wiring: canvas display, status line, panel, orbit input.

import { ViewerClient, type SocketLike } from "./client.js";
import { OrbitCamera, RateLimiter } from "./orbit.js";
import { buildPanel } from "./panel.js";
import { renderPassBars } from "./passbars.js";
import { rgbToRgba } from "./protocol.js";

const PASS_DUMPS = [
  "raymask",
  "variance",
  "hit-ratio",
  "merged",
  "reconstructed",
  "post-combined",
  "sharp",
  "bokeh",
];

function main(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const status = document.getElementById("status")!;
  const banner = document.getElementById("banner")!;
  const panelRoot = document.getElementById("panel")!;
  const barsRoot = document.getElementById("passbars")!;
  const dumpCanvas = document.getElementById("dump") as HTMLCanvasElement;

  const params = new URLSearchParams(location.search);
  const url = params.get("ws") ?? `ws://${location.hostname || "127.0.0.1"}:8765`;

  const client = new ViewerClient((u) => new WebSocket(u) as unknown as SocketLike);
  const panel = buildPanel(panelRoot, client, PASS_DUMPS);
  client.connect(url);

  let orbit: OrbitCamera | null = null;
  const limiter = new RateLimiter(30);
  const keysDown = new Set<string>();

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (ev.buttons === 0 || !orbit) {
      return;
    }
    orbit.rotate(ev.movementX, ev.movementY);
    pushCamera();
  });
  canvas.addEventListener("wheel", (ev) => {
    if (!orbit) {
      return;
    }
    ev.preventDefault();
    orbit.zoom(ev.deltaY > 0 ? 1.1 : 1 / 1.1);
    pushCamera();
  });
  window.addEventListener("keydown", (ev) => keysDown.add(ev.key.toLowerCase()));
  window.addEventListener("keyup", (ev) => keysDown.delete(ev.key.toLowerCase()));

  function pushCamera(): void {
    if (orbit && limiter.allow(performance.now())) {
      client.setCamera(orbit.position(), orbit.lookAt());
    }
  }

  function stepKeys(): void {
    if (!orbit || keysDown.size === 0) {
      return;
    }
    const sp = 0.02;
    const dx = (keysDown.has("d") ? sp : 0) - (keysDown.has("a") ? sp : 0);
    const dy = (keysDown.has("e") ? sp : 0) - (keysDown.has("q") ? sp : 0);
    const dz = (keysDown.has("w") ? sp : 0) - (keysDown.has("s") ? sp : 0);
    if (dx || dy || dz) {
      orbit.translate(dx, dy, dz);
      pushCamera();
    }
  }

  function draw(): void {
    const st = client.state;
    const frame = st.latest;
    if (frame) {
      if (canvas.width !== frame.width || canvas.height !== frame.height) {
        canvas.width = frame.width;
        canvas.height = frame.height;
      }
      ctx.putImageData(new ImageData(rgbToRgba(frame.rgb, frame.width, frame.height), frame.width, frame.height), 0, 0);
      if (!orbit) {
        // seed the orbit from the first echoed camera pose if present
        const p = st.serverParams;
        const d = typeof p["focus_distance"] === "number" ? (p["focus_distance"] as number) : 2;
        orbit = new OrbitCamera([0, 0, 0], [0, 0, d]);
      }
      renderPassBars(barsRoot, st.passesMs);
      status.textContent =
        `frame ${st.lastFrameIndex} | ${st.fps.toFixed(1)} fps | mode ${st.serverParams["mode"] ?? "?"}` +
        ` | rays ${frame.meta.totalRays ?? 0} | dropped ${st.droppedFrames}`;
    }
    banner.textContent = st.connectionStatus === "live" ? "" : `${st.connectionStatus}: ${st.lastError} (retrying)`;
    banner.className = st.connectionStatus === "live" ? "hidden" : "banner";
    const dump = st.passDumps.size ? [...st.passDumps.values()].pop() : null;
    if (dump) {
      dumpCanvas.width = dump.width;
      dumpCanvas.height = dump.height;
      dumpCanvas
        .getContext("2d")!
        .putImageData(new ImageData(rgbToRgba(dump.rgb, dump.width, dump.height), dump.width, dump.height), 0, 0);
    }
    panel.refresh();
    stepKeys();
    requestAnimationFrame(draw);
  }

  requestAnimationFrame(draw);
}

main();
