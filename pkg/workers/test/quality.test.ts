import * as assert from "node:assert/strict";
import * as fs from "node:fs";
import { test } from "node:test";
import { startWorker } from "./helpers.js";
import { noise, sine, tempDir, writeFixtureWav } from "./fixtures.js";
import { flatnessQualityScore, spectralFlatness } from "../src/dsp.js";

test("tonal audio outranks noise and both stay in [1, 5]", async () => {
  const dir = tempDir("wildcut-q-");
  const tone = writeFixtureWav(dir, "tone.wav", sine(440, 1.0, 24000, 0.5));
  const hiss = writeFixtureWav(dir, "noise.wav", noise(1.0, 24000, 0.5));
  const { worker } = await startWorker(["--stage", "quality"]);
  try {
    const toneScore = (await worker.request(1, { audio: tone })).payload.score;
    const noiseScore = (await worker.request(2, { audio: hiss })).payload.score;
    assert.ok(toneScore > 4.0, `tone scored ${toneScore}`);
    assert.ok(noiseScore < 2.0, `noise scored ${noiseScore}`);
    assert.ok(toneScore <= 5 && noiseScore >= 1);
  } finally {
    worker.close();
  }
});

test("mos sidecar wins over the formula", async () => {
  const dir = tempDir("wildcut-q-");
  const wav = writeFixtureWav(dir, "scored.wav", sine(440, 0.5, 24000));
  fs.writeFileSync(wav + ".mos", "3.7");
  const { worker } = await startWorker(["--stage", "quality"]);
  try {
    const reply = await worker.request(1, { audio: wav });
    assert.equal(reply.payload.score, 3.7);
  } finally {
    worker.close();
  }
});

test("flatness formula is deterministic and bounded", () => {
  const x = sine(440, 1.0, 24000, 0.5);
  assert.equal(flatnessQualityScore(x), flatnessQualityScore(x.slice()));
  assert.equal(flatnessQualityScore(new Float32Array(24000)), 1);
  const f = spectralFlatness(noise(1.0, 24000, 0.5));
  assert.ok(f > 0.8, `white noise flatness ${f}`);
});
