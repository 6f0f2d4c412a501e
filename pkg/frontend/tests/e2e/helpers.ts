import { spawn, type ChildProcess } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export interface GatewayHandle {
  baseUrl: string;
  process: ChildProcess;
  client: (token: string) => ApiClient;
  stop: () => void;
}

export async function startGateway(port: number): Promise<GatewayHandle> {
  const child = spawn("python3", [join(here, "gateway_fixture.py"), String(port)], {
    stdio: ["ignore", "inherit", "inherit"],
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  const probe = new ApiClient(baseUrl, "tok-admin");
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await probe.federationStatus();
      if (response.status === 200) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error("gateway did not become ready within 30s");
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  return {
    baseUrl,
    process: child,
    client: (token: string) => new ApiClient(baseUrl, token),
    stop: () => child.kill(),
  };
}

/** Deterministic PRNG so the generated intervals are reproducible. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function expectOk<T>(response: { status: number; body: T | unknown }, what: string): T {
  if (response.status >= 400) {
    throw new Error(`${what} failed with ${response.status}: ${JSON.stringify(response.body)}`);
  }
  return response.body as T;
}
