/**
 * Batched transcription stage. One request carries the whole batch and every
 * item gets exactly one aligned result; item-level failures come back as
 * {"error": ...} entries so one bad clip never poisons its neighbors.
 *
 * The stub serves `<audio>.txt` / `<audio>.lang.json` sidecars, else a
 * deterministic synthetic transcript sized to the clip duration. Language
 * identification always returns a code and confidence, hint or no hint.
 * Real transcription wraps a Whisper-family backend loaded once per process.
 */

import * as fs from "node:fs";
import { Handler } from "../protocol.js";
import { readWavMono } from "../wav.js";

const WORDS = ["the", "quick", "brown", "fox", "jumps", "over", "lazy", "dogs"];
const CHARS_PER_SECOND = 12;

export function syntheticTranscript(durationS: number): string {
  const budget = Math.max(1, Math.round(durationS * CHARS_PER_SECOND));
  const words: string[] = [];
  let total = 0;
  for (let i = 0; total < budget; i++) {
    const word = WORDS[i % WORDS.length];
    words.push(word);
    total += word.length + (words.length > 1 ? 1 : 0);
  }
  return words.join(" ");
}

interface AsrItem {
  audio?: string;
}

export async function createAsrHandler(model: string, batchSize: number): Promise<Handler> {
  if (model !== "stub") {
    throw new Error(
      `asr model ${model} is not bundled; install a whisper backend and ` +
        `point --model at it, or use --model stub`,
    );
  }
  if (batchSize < 1) throw new Error("batch size must be >= 1");

  return (payload: any) => {
    const items = payload.items;
    if (!Array.isArray(items)) throw new Error("asr payload needs an 'items' list");
    const hint = typeof payload.language_hint === "string" ? payload.language_hint : null;

    const results = (items as AsrItem[]).map((item) => {
      const audio = String(item.audio ?? "");
      if (!fs.existsSync(audio)) {
        return { error: `no such file: ${audio}` };
      }
      let language = hint ?? "en";
      let confidence = hint ? 0.95 : 0.9;
      const langSidecar = audio + ".lang.json";
      if (fs.existsSync(langSidecar)) {
        const meta = JSON.parse(fs.readFileSync(langSidecar, "utf-8"));
        language = String(meta.language ?? language);
        confidence = Number(meta.confidence ?? 1.0);
      }
      const textSidecar = audio + ".txt";
      if (fs.existsSync(textSidecar)) {
        return { text: fs.readFileSync(textSidecar, "utf-8").trim(), language, confidence };
      }
      let durationS: number;
      try {
        const { samples, sampleRate } = readWavMono(audio);
        durationS = samples.length / sampleRate;
      } catch (err) {
        return { error: err instanceof Error ? err.message : String(err) };
      }
      return { text: syntheticTranscript(durationS), language, confidence };
    });
    return { items: results };
  };
}
