/** Test-side protocol client: spawns a worker and correlates its replies. */

import { ChildProcess, spawn } from "node:child_process";
import * as path from "node:path";
import * as readline from "node:readline";
import * as url from "node:url";

const HERE = path.dirname(url.fileURLToPath(import.meta.url));
export const MAIN = path.join(HERE, "..", "src", "main.js");

export class WorkerProc {
  proc: ChildProcess;
  stderrTail: string[] = [];
  private queue: any[] = [];
  private waiters: Array<(msg: any) => void> = [];

  constructor(args: string[]) {
    this.proc = spawn(process.execPath, [MAIN, ...args], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    const lines = readline.createInterface({ input: this.proc.stdout! });
    lines.on("line", (line) => {
      let msg: any;
      try {
        msg = JSON.parse(line);
      } catch {
        return;
      }
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    });
    const err = readline.createInterface({ input: this.proc.stderr! });
    err.on("line", (line) => {
      this.stderrTail.push(line);
      if (this.stderrTail.length > 20) this.stderrTail.shift();
    });
  }

  send(obj: unknown): void {
    this.proc.stdin!.write(JSON.stringify(obj) + "\n");
  }

  sendRaw(line: string): void {
    this.proc.stdin!.write(line + "\n");
  }

  next(timeoutMs = 10000): Promise<any> {
    const queued = this.queue.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const at = this.waiters.indexOf(resolve);
        if (at >= 0) this.waiters.splice(at, 1);
        reject(new Error(`no message within ${timeoutMs}ms; stderr: ${this.stderrTail.join(" | ")}`));
      }, timeoutMs);
      this.waiters.push((msg) => {
        clearTimeout(timer);
        resolve(msg);
      });
    });
  }

  async request(id: number, payload: unknown, timeoutMs = 10000): Promise<any> {
    this.send({ type: "request", id, payload });
    return this.next(timeoutMs);
  }

  exited(): Promise<number | null> {
    if (this.proc.exitCode !== null) return Promise.resolve(this.proc.exitCode);
    return new Promise((resolve) => this.proc.once("exit", (code) => resolve(code)));
  }

  close(): void {
    this.proc.stdin?.end();
    this.proc.kill();
  }
}

export async function startWorker(args: string[]): Promise<{ worker: WorkerProc; hello: any }> {
  const worker = new WorkerProc(args);
  const hello = await worker.next(15000);
  return { worker, hello };
}
