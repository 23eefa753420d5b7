/**
 * Voice activity detection stage. The stub is a deterministic
 * energy-hysteresis detector; `--model /path/to/silero.onnx` switches to the
 * Silero network through onnxruntime-node when both are installed.
 */

import * as fs from "node:fs";
import { Handler, log } from "../protocol.js";
import { DEFAULT_VAD, energyVadRegions } from "../dsp.js";
import { readWavMono } from "../wav.js";

export async function createVadHandler(model: string): Promise<Handler> {
  if (model === "stub") {
    return (payload: any) => {
      const audio = String(payload.audio ?? "");
      if (!fs.existsSync(audio)) throw new Error(`no such file: ${audio}`);
      const { samples, sampleRate } = readWavMono(audio);
      return { regions: energyVadRegions(samples, sampleRate, DEFAULT_VAD) };
    };
  }
  return createSileroHandler(model);
}

const SILERO_RATE = 16000;
const SILERO_WINDOW = 512;
const ON_PROB = 0.5;
const OFF_PROB = 0.35;

/** Nearest-rate linear resample; plenty for frame-level speech probabilities. */
function toSileroRate(samples: Float32Array, sampleRate: number): Float32Array {
  if (sampleRate === SILERO_RATE) return samples;
  const outLen = Math.round((samples.length * SILERO_RATE) / sampleRate);
  const out = new Float32Array(outLen);
  const step = samples.length / outLen;
  for (let i = 0; i < outLen; i++) {
    const pos = i * step;
    const lo = Math.floor(pos);
    const hi = Math.min(samples.length - 1, lo + 1);
    out[i] = samples[lo] + (pos - lo) * (samples[hi] - samples[lo]);
  }
  return out;
}

async function createSileroHandler(modelPath: string): Promise<Handler> {
  if (!fs.existsSync(modelPath)) {
    throw new Error(`silero checkpoint not found: ${modelPath}`);
  }
  let ort: any;
  try {
    // optional dependency: only needed when serving the real model
    ort = await import("onnxruntime-node" as string);
  } catch {
    throw new Error("silero VAD requires onnxruntime-node (npm install onnxruntime-node)");
  }
  const session = await ort.InferenceSession.create(modelPath);
  log(`silero model loaded from ${modelPath}`);

  return async (payload: any) => {
    const audio = String(payload.audio ?? "");
    if (!fs.existsSync(audio)) throw new Error(`no such file: ${audio}`);
    const raw = readWavMono(audio);
    const samples = toSileroRate(raw.samples, raw.sampleRate);

    let state = new ort.Tensor("float32", new Float32Array(2 * 1 * 128), [2, 1, 128]);
    const sr = new ort.Tensor("int64", BigInt64Array.from([BigInt(SILERO_RATE)]));
    const probs: number[] = [];
    for (let at = 0; at + SILERO_WINDOW <= samples.length; at += SILERO_WINDOW) {
      const window = samples.subarray(at, at + SILERO_WINDOW);
      const result = await session.run({
        input: new ort.Tensor("float32", window, [1, SILERO_WINDOW]),
        state,
        sr,
      });
      state = result.stateN ?? result.state ?? state;
      probs.push(Number((result.output.data as Float32Array)[0]));
    }

    const hopS = SILERO_WINDOW / SILERO_RATE;
    const regions: Array<[number, number]> = [];
    let start: number | null = null;
    for (let i = 0; i < probs.length; i++) {
      const t = i * hopS;
      if (start === null && probs[i] >= ON_PROB) start = t;
      else if (start !== null && probs[i] < OFF_PROB) {
        regions.push([start, t]);
        start = null;
      }
    }
    if (start !== null) regions.push([start, probs.length * hopS]);
    return { regions };
  };
}
