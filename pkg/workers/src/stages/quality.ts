/**
 * Speech quality scoring stage, always a scalar in [1, 5]. The stub honors a
 * `<audio>.mos` sidecar and otherwise applies the documented
 * spectral-flatness formula. Real scoring wraps the DNSMOS ONNX model.
 */

import * as fs from "node:fs";
import { Handler } from "../protocol.js";
import { flatnessQualityScore } from "../dsp.js";
import { readWavMono } from "../wav.js";

export async function createQualityHandler(model: string): Promise<Handler> {
  if (model !== "stub") {
    throw new Error(
      `quality model ${model} is not bundled; fetch the DNSMOS ONNX model ` +
        `and point --model at it, or use --model stub`,
    );
  }
  return (payload: any) => {
    const audio = String(payload.audio ?? "");
    if (!fs.existsSync(audio)) throw new Error(`no such file: ${audio}`);
    const sidecar = audio + ".mos";
    if (fs.existsSync(sidecar)) {
      const score = Number(fs.readFileSync(sidecar, "utf-8").trim());
      if (!Number.isFinite(score)) throw new Error(`bad .mos sidecar: ${sidecar}`);
      return { score };
    }
    const { samples } = readWavMono(audio);
    return { score: flatnessQualityScore(samples) };
  };
}
