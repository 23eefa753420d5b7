/**
 * Stage worker entry point.
 *
 *   node dist/src/main.js --stage vad [--model stub|/path/to/model] \
 *     [--device cpu] [--batch-size 16]
 *
 * The model loads once, then the worker says hello and serves requests until
 * stdin closes. A failed model load prints to stderr and exits nonzero so the
 * engine can surface the tail.
 */

import { Stage, log, serve } from "./protocol.js";
import { createAsrHandler } from "./stages/asr.js";
import { createDiarizeHandler } from "./stages/diarize.js";
import { createQualityHandler } from "./stages/quality.js";
import { createSeparateHandler } from "./stages/separate.js";
import { createVadHandler } from "./stages/vad.js";

const STAGES: Stage[] = ["separate", "diarize", "vad", "asr", "quality"];

interface Args {
  stage: Stage;
  model: string;
  device: string;
  batchSize: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { stage: "vad", model: "stub", device: "cpu", batchSize: 16 };
  let stageSeen = false;
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    switch (flag) {
      case "--stage":
        if (!STAGES.includes(value as Stage)) {
          throw new Error(`unknown stage ${value}; expected one of ${STAGES.join(", ")}`);
        }
        args.stage = value as Stage;
        stageSeen = true;
        i++;
        break;
      case "--model":
        args.model = value;
        i++;
        break;
      case "--device":
        args.device = value;
        i++;
        break;
      case "--batch-size":
        args.batchSize = Number.parseInt(value, 10);
        if (!Number.isFinite(args.batchSize) || args.batchSize < 1) {
          throw new Error(`bad --batch-size ${value}`);
        }
        i++;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!stageSeen) throw new Error("--stage is required");
  return args;
}

async function makeHandler(args: Args) {
  switch (args.stage) {
    case "separate":
      return createSeparateHandler(args.model);
    case "diarize":
      return createDiarizeHandler(args.model);
    case "vad":
      return createVadHandler(args.model);
    case "asr":
      return createAsrHandler(args.model, args.batchSize);
    case "quality":
      return createQualityHandler(args.model);
  }
}

async function main(): Promise<void> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    log(`argument error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
  try {
    const handler = await makeHandler(args);
    log(`worker ready: stage=${args.stage} model=${args.model} device=${args.device}`);
    await serve(args.stage, handler);
  } catch (err) {
    log(`model load failed: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}

void main();
