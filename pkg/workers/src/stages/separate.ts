/**
 * Source separation stage. The stub copies the input verbatim (identity
 * vocals), which preserves duration exactly. Real separation wraps the
 * UVR-MDX-Net checkpoint; that model is an explicit setup step and is never
 * downloaded at serve time.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { Handler } from "../protocol.js";

export async function createSeparateHandler(model: string): Promise<Handler> {
  if (model !== "stub") {
    throw new Error(
      `separation model ${model} is not bundled; install the UVR-MDX-Net ` +
        `checkpoint and point --model at it (stub mode: --model stub)`,
    );
  }
  return (payload: any) => {
    const audio = String(payload.audio ?? "");
    const out = String(payload.out ?? "");
    if (!fs.existsSync(audio)) throw new Error(`no such file: ${audio}`);
    if (!out) throw new Error("separate request needs an 'out' path");
    fs.mkdirSync(path.dirname(out), { recursive: true });
    fs.copyFileSync(audio, out);
    return { audio: out };
  };
}
