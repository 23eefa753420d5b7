/**
 * Speaker diarization stage. The stub reads a scripted `<audio>.turns.json`
 * sidecar when present and otherwise reports one single-speaker turn over
 * the whole file. Real diarization wraps the pyannote pipeline served from
 * Python; the checkpoint is an explicit setup step.
 */

import * as fs from "node:fs";
import { Handler } from "../protocol.js";
import { readWavMono } from "../wav.js";

interface Turn {
  speaker: string;
  start_s: number;
  end_s: number;
}

export async function createDiarizeHandler(model: string): Promise<Handler> {
  if (model !== "stub") {
    throw new Error(
      `diarization model ${model} is not bundled; serve pyannote separately ` +
        `or use --model stub`,
    );
  }
  return (payload: any) => {
    const audio = String(payload.audio ?? "");
    if (!fs.existsSync(audio)) throw new Error(`no such file: ${audio}`);
    const sidecar = audio + ".turns.json";
    if (fs.existsSync(sidecar)) {
      const turns = JSON.parse(fs.readFileSync(sidecar, "utf-8")) as Turn[];
      return { turns };
    }
    const { samples, sampleRate } = readWavMono(audio);
    return {
      turns: [{ speaker: "spk0", start_s: 0, end_s: samples.length / sampleRate }],
    };
  };
}
