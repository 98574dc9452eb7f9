// Spawning helpers: the integration tests drive the real Python bridge and
// CLI, talking to them exactly as a deployment would.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PYTHON = process.env.SWARMLINK_PYTHON ?? "python3";

export interface BridgeHandle {
  proc: ChildProcess;
  url: string;
  stop(): void;
}

export function startBridge(extraArgs: string[] = []): Promise<BridgeHandle> {
  return new Promise((resolve, reject) => {
    const proc = spawn(
      PYTHON,
      ["-m", "swarmlink", "run", "sandbox", "--bridge-port", "0", "--bridge-lockstep", ...extraArgs],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    let buffer = "";
    let settled = false;
    const fail = (err: Error) => {
      if (!settled) {
        settled = true;
        proc.kill();
        reject(err);
      }
    };
    proc.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/BRIDGE READY (ws:\/\/[\d.]+:\d+)/);
      if (match && !settled) {
        settled = true;
        resolve({
          proc,
          url: match[1],
          stop: () => proc.kill("SIGTERM"),
        });
      }
    });
    proc.stderr!.on("data", () => {});
    proc.on("exit", (code) => fail(new Error(`bridge exited early (code ${code})`)));
    proc.on("error", fail);
    setTimeout(() => fail(new Error("bridge startup timed out")), 30_000);
  });
}

export interface HeadlessResult {
  records: Record<string, any>[];
  metrics: Record<string, any>;
}

/** Write a scenario object, run it headless, return parsed log + metrics. */
export function runHeadless(scenario: object): Promise<HeadlessResult> {
  const dir = mkdtempSync(join(tmpdir(), "swarmlink-"));
  const scenarioPath = join(dir, "scenario.json");
  const logPath = join(dir, "out.jsonl");
  writeFileSync(scenarioPath, JSON.stringify(scenario));
  return new Promise((resolve, reject) => {
    const proc = spawn(PYTHON, ["-m", "swarmlink", "run", scenarioPath, "--out", logPath], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    let out = "";
    let err = "";
    proc.stdout!.on("data", (c: Buffer) => (out += c.toString()));
    proc.stderr!.on("data", (c: Buffer) => (err += c.toString()));
    proc.on("exit", (code) => {
      if (code !== 0) {
        reject(new Error(`headless run failed (${code}): ${err}`));
        return;
      }
      const records = readFileSync(logPath, "utf-8")
        .trim()
        .split("\n")
        .map((line) => JSON.parse(line));
      const jsonStart = out.indexOf("[");
      const metrics = JSON.parse(out.slice(jsonStart))[0];
      resolve({ records, metrics });
    });
    proc.on("error", reject);
  });
}

export function tickRecords(records: Record<string, any>[]): Record<string, any>[] {
  return records.filter((r) => r.kind === "tick");
}
