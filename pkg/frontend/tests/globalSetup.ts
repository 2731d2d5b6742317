// Boots the real advisory service (in-memory store, mock model backend)
// for the integration test; unit tests ignore it.
import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

export const SERVICE_URL = "http://127.0.0.1:8977";

let proc: ChildProcess | undefined;

export async function setup(): Promise<void> {
  const repoRoot = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
  proc = spawn("python3", ["-m", "farmsense.cli", "serve", "--port", "8977"], {
    cwd: repoRoot,
    stdio: ["ignore", "ignore", "pipe"],
  });
  let stderr = "";
  proc.stderr?.on("data", (chunk) => (stderr += String(chunk)));

  const deadline = Date.now() + 25000;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${SERVICE_URL}/v1/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  proc.kill();
  throw new Error(`farmsense service did not become healthy:\n${stderr}`);
}

export async function teardown(): Promise<void> {
  proc?.kill();
}
