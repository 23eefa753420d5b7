/** Minimal RIFF/WAV I/O: 16-bit PCM and 32-bit float, downmixed to mono. */

import * as fs from "node:fs";

export interface MonoAudio {
  samples: Float32Array;
  sampleRate: number;
}

export function readWavMono(path: string): MonoAudio {
  const buf = fs.readFileSync(path);
  if (buf.length < 44 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let offset = 12;
  let format = 0;
  let channels = 0;
  let sampleRate = 0;
  let bits = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const id = buf.toString("ascii", offset, offset + 4);
    const size = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (id === "fmt ") {
      format = buf.readUInt16LE(body);
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bits = buf.readUInt16LE(body + 14);
      if (format === 0xfffe && size >= 40) {
        format = buf.readUInt16LE(body + 24);
      }
    } else if (id === "data") {
      data = buf.subarray(body, body + size);
    }
    offset = body + size + (size & 1);
  }
  if (!channels || !data) throw new Error(`${path}: missing fmt or data chunk`);
  if (data.length === 0) throw new Error(`${path}: empty audio payload`);

  let flat: Float32Array;
  if (format === 1 && bits === 16) {
    const n = Math.floor(data.length / 2);
    flat = new Float32Array(n);
    for (let i = 0; i < n; i++) flat[i] = data.readInt16LE(i * 2) / 32768;
  } else if (format === 3 && bits === 32) {
    const n = Math.floor(data.length / 4);
    flat = new Float32Array(n);
    for (let i = 0; i < n; i++) flat[i] = data.readFloatLE(i * 4);
  } else {
    throw new Error(`${path}: unsupported WAV format (code ${format}, ${bits}-bit)`);
  }

  const frames = Math.floor(flat.length / channels);
  const mono = new Float32Array(frames);
  if (channels === 1) {
    mono.set(flat.subarray(0, frames));
  } else {
    for (let i = 0; i < frames; i++) {
      let acc = 0;
      for (let c = 0; c < channels; c++) acc += flat[i * channels + c];
      mono[i] = acc / channels;
    }
  }
  return { samples: mono, sampleRate };
}

export function writeWavPcm16(path: string, samples: Float32Array, sampleRate: number): void {
  const payload = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    const v = Math.max(-32768, Math.min(32767, Math.round(samples[i] * 32767)));
    payload.writeInt16LE(v, i * 2);
  }
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + payload.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20);
  header.writeUInt16LE(1, 22);
  header.writeUInt32LE(sampleRate, 24);
  header.writeUInt32LE(sampleRate * 2, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(payload.length, 40);
  fs.writeFileSync(path, Buffer.concat([header, payload]));
}
