import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

/**
 * Dataset format: a `<name>.json` metadata sidecar plus a `<name>.f32`
 * payload of little-endian float32 samples, channel-major.
 */

export interface ChannelInfo {
  name: string;
  kind: string;
  bad: boolean;
  position: [number, number, number] | null;
}

export interface RecordingDataset {
  fs: number;
  channels: ChannelInfo[];
  events: number[][];
  nSamples: number;
  lowpassHz: number | null;
  /** channels x samples, row-major. */
  data: Float32Array;
}

export interface EpochsDataset {
  fs: number;
  t0: number;
  channels: ChannelInfo[];
  nTrials: number;
  nSamples: number;
  rejected: boolean[];
  /** trials x channels x samples, row-major. */
  data: Float32Array;
}

function sidecarPath(base: string): string {
  return base.endsWith(".json") || base.endsWith(".f32")
    ? base.replace(/\.(json|f32)$/, ".json")
    : `${base}.json`;
}

function payloadPath(base: string): string {
  return sidecarPath(base).replace(/\.json$/, ".f32");
}

function readSidecar(base: string): Record<string, unknown> {
  return JSON.parse(readFileSync(sidecarPath(base), "utf8"));
}

function readPayload(base: string, expected: number): Float32Array {
  const buf = readFileSync(payloadPath(base));
  const n = buf.byteLength / 4;
  if (!Number.isInteger(n) || n !== expected) {
    throw new Error(
      `payload has ${n} samples, sidecar promises ${expected}: ${payloadPath(base)}`,
    );
  }
  // copy to a fresh buffer so alignment is guaranteed
  const out = new Float32Array(n);
  out.set(new Float32Array(buf.buffer, buf.byteOffset, n));
  return out;
}

function channelFrom(c: Record<string, unknown>): ChannelInfo {
  return {
    name: String(c.name),
    kind: String(c.kind),
    bad: Boolean(c.bad),
    position: (c.position as [number, number, number] | null) ?? null,
  };
}

export function loadRecording(base: string): RecordingDataset {
  const s = readSidecar(base);
  if (s.type !== "recording") throw new Error(`${base} is not a recording dataset`);
  const channels = (s.channels as Record<string, unknown>[]).map(channelFrom);
  const nSamples = Number(s["n-samples"]);
  return {
    fs: Number(s.fs),
    channels,
    events: (s.events as number[][]) ?? [],
    nSamples,
    lowpassHz: s["lowpass-hz"] == null ? null : Number(s["lowpass-hz"]),
    data: readPayload(base, channels.length * nSamples),
  };
}

export function loadEpochs(base: string): EpochsDataset {
  const s = readSidecar(base);
  if (s.type !== "epochs") throw new Error(`${base} is not an epochs dataset`);
  const channels = (s.channels as Record<string, unknown>[]).map(channelFrom);
  const nTrials = Number(s["n-trials"]);
  const nSamples = Number(s["n-samples"]);
  return {
    fs: Number(s.fs),
    t0: Number(s.t0),
    channels,
    nTrials,
    nSamples,
    rejected: (s.rejected as boolean[]) ?? [],
    data: readPayload(base, nTrials * channels.length * nSamples),
  };
}

/** sha256 over the sidecar bytes followed by the payload bytes. */
export function datasetHash(base: string): string {
  const h = createHash("sha256");
  h.update(readFileSync(sidecarPath(base)));
  h.update(readFileSync(payloadPath(base)));
  return h.digest("hex");
}
