/** Audio fixture builders shared by the worker tests. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { writeWavPcm16 } from "../src/wav.js";

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function sine(freqHz: number, durationS: number, rate: number, amplitude = 0.5): Float32Array {
  const n = Math.round(durationS * rate);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = amplitude * Math.sin((2 * Math.PI * freqHz * i) / rate);
  return out;
}

export function concat(parts: Float32Array[]): Float32Array {
  const total = parts.reduce((acc, p) => acc + p.length, 0);
  const out = new Float32Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

export function quiet(durationS: number, rate: number, level = 1e-4): Float32Array {
  const n = Math.round(durationS * rate);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = level;
  return out;
}

export function noise(durationS: number, rate: number, amplitude = 0.5, seed = 12345): Float32Array {
  // xorshift PRNG: deterministic fixtures without a dependency
  let state = seed >>> 0 || 1;
  const n = Math.round(durationS * rate);
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    out[i] = amplitude * ((state / 0xffffffff) * 2 - 1);
  }
  return out;
}

export function writeFixtureWav(dir: string, name: string, samples: Float32Array, rate = 24000): string {
  const p = path.join(dir, name);
  writeWavPcm16(p, samples, rate);
  return p;
}
