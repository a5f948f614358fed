// Connection handling around the wire protocol: decode incoming frames
// and acks into SessionState, reconnect with a delay when the service
// drops. The socket is injected so tests can drive the client without a
// browser.

import {
  decodeFramePayload,
  encodePause,
  encodeRequestPassDump,
  encodeResume,
  encodeSetCamera,
  encodeSetMode,
  encodeSetParam,
  parseControlReply,
} from "./protocol.js";
import { SessionState } from "./state.js";

export interface SocketLike {
  binaryType: string;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  retryMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class ViewerClient {
  readonly state = new SessionState();
  private socket: SocketLike | null = null;
  private url = "";
  private closed = false;
  private readonly retryMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  constructor(private readonly makeSocket: SocketFactory, opts: ClientOptions = {}) {
    this.retryMs = opts.retryMs ?? 1500;
    this.now = opts.now ?? (() => Date.now());
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(url: string): void {
    this.url = url;
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.state.connectionStatus = "connecting";
    let sock: SocketLike;
    try {
      sock = this.makeSocket(this.url);
    } catch (err) {
      this.state.onDisconnect(String(err));
      this.scheduleRetry();
      return;
    }
    this.socket = sock;
    sock.binaryType = "arraybuffer";
    sock.onmessage = (ev) => this.onMessage(ev.data);
    sock.onclose = () => {
      if (!this.closed) {
        this.state.onDisconnect("connection closed");
        this.scheduleRetry();
      }
    };
    sock.onerror = () => {
      this.state.onDisconnect("connection error");
    };
  }

  private scheduleRetry(): void {
    if (this.closed) {
      return;
    }
    this.setTimer(() => {
      if (!this.closed) {
        this.open();
      }
    }, this.retryMs);
  }

  private onMessage(data: unknown): void {
    if (typeof data === "string") {
      this.state.onControlReply(parseControlReply(data));
      return;
    }
    if (data instanceof ArrayBuffer) {
      this.state.onFrame(decodeFramePayload(data), this.now());
    }
  }

  private sendSafe(text: string): void {
    try {
      this.socket?.send(text);
    } catch {
      // connection raced shut; the close handler retries
    }
  }

  setParam(name: string, value: number | boolean): void {
    this.sendSafe(encodeSetParam(name, value));
  }

  setCamera(position: number[], lookAt: number[]): void {
    this.sendSafe(encodeSetCamera(position, lookAt));
  }

  setMode(mode: string): void {
    this.sendSafe(encodeSetMode(mode));
  }

  requestPassDump(name: string): void {
    this.sendSafe(encodeRequestPassDump(name));
  }

  pause(): void {
    this.sendSafe(encodePause());
  }

  resume(): void {
    this.sendSafe(encodeResume());
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
