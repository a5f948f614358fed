// Session state: all truth lives server-side. The UI only shows parameter
// values the service has echoed back (acks and frame metadata), never
// optimistic local values. Frames may drop; the newest one wins.

import type { ControlReply, DecodedFrame } from "./protocol.js";

export interface ParamStatus {
  value: number | string | boolean;
  effectiveFrame: number;
}

export class SessionState {
  latest: DecodedFrame | null = null;
  lastFrameIndex = -1;
  droppedFrames = 0;
  fps = 0;
  connectionStatus: "connecting" | "live" | "error" = "connecting";
  lastError = "";
  acked = new Map<string, ParamStatus>();
  paramErrors = new Map<string, string>();
  serverParams: Record<string, number | string> = {};
  passesMs: Record<string, number> = {};
  passDumps = new Map<string, DecodedFrame>();

  private arrivals: number[] = [];

  onFrame(frame: DecodedFrame, nowMs: number): void {
    if (frame.meta.kind === "passDump") {
      this.passDumps.set(frame.meta.name ?? "?", frame);
      return;
    }
    const idx = frame.meta.frameIndex;
    if (idx <= this.lastFrameIndex) {
      return; // stale; always show the newest received frame
    }
    if (this.lastFrameIndex >= 0) {
      this.droppedFrames += idx - this.lastFrameIndex - 1;
    }
    this.lastFrameIndex = idx;
    this.latest = frame;
    this.serverParams = frame.meta.params ?? {};
    this.passesMs = frame.meta.passesMs ?? {};
    this.arrivals.push(nowMs);
    if (this.arrivals.length > 12) {
      this.arrivals.shift();
    }
    if (this.arrivals.length >= 2) {
      const span = this.arrivals[this.arrivals.length - 1] - this.arrivals[0];
      this.fps = span > 0 ? ((this.arrivals.length - 1) * 1000) / span : 0;
    }
    this.connectionStatus = "live";
  }

  onControlReply(reply: ControlReply): void {
    if (reply.kind === "ack") {
      if (reply.param !== undefined && reply.value !== undefined) {
        this.acked.set(reply.param, { value: reply.value, effectiveFrame: reply.effectiveFrame });
        this.paramErrors.delete(reply.param);
      }
      if (reply.mode !== undefined) {
        this.acked.set("mode", { value: reply.mode, effectiveFrame: reply.effectiveFrame });
      }
      return;
    }
    if (reply.param) {
      this.paramErrors.set(reply.param, reply.message);
    } else {
      this.lastError = reply.message;
    }
  }

  // the value a widget may display: the server echo or nothing
  displayValue(param: string): number | string | boolean | undefined {
    if (param in this.serverParams) {
      return this.serverParams[param];
    }
    return this.acked.get(param)?.value;
  }

  totalPassMs(): number {
    return Object.entries(this.passesMs)
      .filter(([k]) => k !== "total" && k !== "fps" && k !== "our_pass")
      .reduce((acc, [, v]) => acc + v, 0);
  }

  onDisconnect(message: string): void {
    this.connectionStatus = "error";
    this.lastError = message;
    this.arrivals = [];
    this.fps = 0;
  }
}
