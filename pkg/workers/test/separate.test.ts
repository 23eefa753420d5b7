import * as assert from "node:assert/strict";
import * as fs from "node:fs";
import * as path from "node:path";
import { test } from "node:test";
import { startWorker } from "./helpers.js";
import { sine, tempDir, writeFixtureWav } from "./fixtures.js";
import { readWavMono } from "../src/wav.js";

test("stub separation preserves content and duration exactly", async () => {
  const dir = tempDir("wildcut-sep-");
  const input = writeFixtureWav(dir, "in.wav", sine(440, 2.5, 24000));
  const out = path.join(dir, "vocals", "out.wav");
  const { worker } = await startWorker(["--stage", "separate"]);
  try {
    const reply = await worker.request(1, { audio: input, out });
    assert.equal(reply.type, "response");
    assert.equal(reply.payload.audio, out);
    assert.deepEqual(fs.readFileSync(out), fs.readFileSync(input));
    const a = readWavMono(input);
    const b = readWavMono(out);
    assert.equal(a.samples.length, b.samples.length);
  } finally {
    worker.close();
  }
});

test("diarize stub reads scripted turns", async () => {
  const dir = tempDir("wildcut-sep-");
  const input = writeFixtureWav(dir, "in.wav", sine(440, 4.0, 24000));
  fs.writeFileSync(
    input + ".turns.json",
    JSON.stringify([
      { speaker: "alice", start_s: 0, end_s: 2 },
      { speaker: "bob", start_s: 2.5, end_s: 4 },
    ]),
  );
  const { worker } = await startWorker(["--stage", "diarize"]);
  try {
    const reply = await worker.request(1, { audio: input });
    assert.equal(reply.payload.turns.length, 2);
    assert.equal(reply.payload.turns[0].speaker, "alice");
  } finally {
    worker.close();
  }
});

test("diarize stub falls back to one full-span turn", async () => {
  const dir = tempDir("wildcut-sep-");
  const input = writeFixtureWav(dir, "plain.wav", sine(440, 3.0, 24000));
  const { worker } = await startWorker(["--stage", "diarize"]);
  try {
    const reply = await worker.request(1, { audio: input });
    assert.equal(reply.payload.turns.length, 1);
    assert.equal(reply.payload.turns[0].speaker, "spk0");
    assert.ok(Math.abs(reply.payload.turns[0].end_s - 3.0) < 1e-6);
  } finally {
    worker.close();
  }
});
