import * as assert from "node:assert/strict";
import { test } from "node:test";
import { startWorker, WorkerProc } from "./helpers.js";
import { sine, tempDir, writeFixtureWav } from "./fixtures.js";

const STAGES = ["separate", "diarize", "vad", "asr", "quality"] as const;

for (const stage of STAGES) {
  test(`hello announces ${stage} and version 1`, async () => {
    const { worker, hello } = await startWorker(["--stage", stage]);
    try {
      assert.equal(hello.type, "hello");
      assert.equal(hello.stage, stage);
      assert.equal(hello.version, 1);
    } finally {
      worker.close();
    }
  });
}

test("requests correlate by id even when interleaved", async () => {
  const dir = tempDir("wildcut-proto-");
  const wav = writeFixtureWav(dir, "probe.wav", sine(440, 1.0, 24000));
  const { worker } = await startWorker(["--stage", "quality"]);
  try {
    worker.send({ type: "request", id: 11, payload: { audio: wav } });
    worker.send({ type: "request", id: 22, payload: { audio: wav } });
    worker.send({ type: "request", id: 33, payload: { audio: wav } });
    const replies = [await worker.next(), await worker.next(), await worker.next()];
    const ids = replies.map((r) => r.id).sort((a, b) => a - b);
    assert.deepEqual(ids, [11, 22, 33]);
    for (const reply of replies) {
      assert.equal(reply.type, "response");
      assert.ok(reply.payload.score >= 1 && reply.payload.score <= 5);
    }
  } finally {
    worker.close();
  }
});

test("bad request becomes an error reply and the worker survives", async () => {
  const dir = tempDir("wildcut-proto-");
  const wav = writeFixtureWav(dir, "probe.wav", sine(440, 0.5, 24000));
  const { worker } = await startWorker(["--stage", "vad"]);
  try {
    const bad = await worker.request(1, { audio: dir + "/absent.wav" });
    assert.equal(bad.type, "error");
    assert.equal(bad.id, 1);
    assert.match(bad.message, /no such file/);
    const good = await worker.request(2, { audio: wav });
    assert.equal(good.type, "response");
    assert.ok(Array.isArray(good.payload.regions));
  } finally {
    worker.close();
  }
});

test("ping yields pong", async () => {
  const { worker } = await startWorker(["--stage", "diarize"]);
  try {
    worker.send({ type: "ping" });
    const pong = await worker.next();
    assert.equal(pong.type, "pong");
  } finally {
    worker.close();
  }
});

test("garbage lines are ignored without dying", async () => {
  const dir = tempDir("wildcut-proto-");
  const wav = writeFixtureWav(dir, "probe.wav", sine(440, 0.5, 24000));
  const { worker } = await startWorker(["--stage", "quality"]);
  try {
    worker.sendRaw("this is not json");
    const reply = await worker.request(5, { audio: wav });
    assert.equal(reply.type, "response");
  } finally {
    worker.close();
  }
});

test("stdin EOF shuts the worker down", async () => {
  const { worker } = await startWorker(["--stage", "separate"]);
  worker.proc.stdin!.end();
  const code = await worker.exited();
  assert.equal(code, 0);
});

test("unknown stage exits nonzero before hello", async () => {
  const worker = new WorkerProc(["--stage", "transmogrify"]);
  const code = await worker.exited();
  assert.equal(code, 2);
  assert.match(worker.stderrTail.join(" "), /unknown stage/);
});

test("unavailable model exits nonzero with a useful message", async () => {
  const worker = new WorkerProc(["--stage", "asr", "--model", "whisper-medium"]);
  const code = await worker.exited();
  assert.equal(code, 1);
  assert.match(worker.stderrTail.join(" "), /not bundled/);
});
