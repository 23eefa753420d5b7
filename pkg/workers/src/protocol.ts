/**
 * Worker side of the line-delimited JSON protocol (version 1).
 *
 * Framing: UTF-8 JSON objects, one per line, LF terminated, over stdio.
 * The worker sends a hello once its model is loaded, answers each request
 * with a response or error correlated by id, and answers pings with pongs.
 * Anything written to stdout must be a protocol line; logging goes to stderr.
 */

import * as readline from "node:readline";

export const PROTOCOL_VERSION = 1;

export type Stage = "separate" | "diarize" | "vad" | "asr" | "quality";

export interface RequestMessage {
  type: "request";
  id: number;
  payload: unknown;
}

export type Handler = (payload: any) => Promise<unknown> | unknown;

export function emit(obj: unknown): void {
  process.stdout.write(JSON.stringify(obj) + "\n");
}

export function log(message: string): void {
  process.stderr.write(message + "\n");
}

/** Run the hello/request/pong loop until stdin closes. */
export async function serve(stage: Stage, handler: Handler): Promise<void> {
  emit({ type: "hello", stage, version: PROTOCOL_VERSION });

  const lines = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of lines) {
    const text = line.trim();
    if (!text) continue;
    let msg: any;
    try {
      msg = JSON.parse(text);
    } catch {
      log(`ignoring unparseable line: ${text.slice(0, 120)}`);
      continue;
    }
    if (msg.type === "ping") {
      emit({ type: "pong" });
      continue;
    }
    if (msg.type !== "request") continue;
    try {
      const payload = await handler(msg.payload ?? {});
      emit({ type: "response", id: msg.id, payload });
    } catch (err) {
      const message = err instanceof Error ? `${err.name}: ${err.message}` : String(err);
      emit({ type: "error", id: msg.id, message });
    }
  }
}
