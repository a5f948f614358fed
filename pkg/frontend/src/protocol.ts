// Wire schema of the render service, consumed verbatim.
//
// Binary frame payload: width u32 LE, height u32 LE, RGB8 rows, then a
// JSON metadata record. Control messages and acks are JSON text.

export interface FrameMeta {
  kind: "frame" | "passDump";
  frameIndex: number;
  name?: string;
  mode?: string;
  params?: Record<string, number | string>;
  passesMs?: Record<string, number>;
  totalRays?: number;
}

export interface DecodedFrame {
  width: number;
  height: number;
  rgb: Uint8Array; // width*height*3, row-major
  meta: FrameMeta;
}

export interface AckReply {
  kind: "ack";
  of?: string;
  param?: string;
  value?: number;
  mode?: string;
  name?: string;
  effectiveFrame: number;
}

export interface ErrorReply {
  kind: "error";
  message: string;
  param?: string;
  allowed?: unknown;
}

export type ControlReply = AckReply | ErrorReply;

export function decodeFramePayload(buf: ArrayBuffer): DecodedFrame {
  if (buf.byteLength < 8) {
    throw new Error(`frame payload too short: ${buf.byteLength} bytes`);
  }
  const view = new DataView(buf);
  const width = view.getUint32(0, true);
  const height = view.getUint32(4, true);
  const n = width * height * 3;
  if (buf.byteLength < 8 + n) {
    throw new Error(`frame payload truncated: need ${8 + n}, got ${buf.byteLength}`);
  }
  const rgb = new Uint8Array(buf, 8, n);
  const metaBytes = new Uint8Array(buf, 8 + n);
  const meta = JSON.parse(new TextDecoder().decode(metaBytes)) as FrameMeta;
  return { width, height, rgb, meta };
}

export function parseControlReply(text: string): ControlReply {
  const msg = JSON.parse(text) as ControlReply;
  if (msg.kind !== "ack" && msg.kind !== "error") {
    throw new Error(`unexpected control reply kind: ${(msg as { kind?: string }).kind}`);
  }
  return msg;
}

export const encodeSetParam = (name: string, value: number | boolean) =>
  JSON.stringify({ kind: "setParam", name, value });

export const encodeSetCamera = (position: number[], lookAt: number[]) =>
  JSON.stringify({ kind: "setCamera", position, look_at: lookAt });

export const encodeSetMode = (mode: string) => JSON.stringify({ kind: "setMode", mode });

export const encodeRequestPassDump = (name: string) =>
  JSON.stringify({ kind: "requestPassDump", name });

export const encodePause = () => JSON.stringify({ kind: "pause" });
export const encodeResume = () => JSON.stringify({ kind: "resume" });

// RGB rows to RGBA pixels for ImageData
export function rgbToRgba(rgb: Uint8Array, width: number, height: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0, j = 0; i < width * height; i++) {
    out[j++] = rgb[i * 3];
    out[j++] = rgb[i * 3 + 1];
    out[j++] = rgb[i * 3 + 2];
    out[j++] = 255;
  }
  return out;
}
