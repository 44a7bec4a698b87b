import { describe, expect, it } from "vitest";

import { Uploader } from "../src/upload.js";
import type { TrialRecord } from "../src/types.js";

function record(i: number): TrialRecord {
  return {
    subject: "s01",
    phase: "test",
    stimulus: 0,
    duration: 2.5,
    choice: 3,
    success: false,
    block: 0,
    trial_in_block: i,
    timestamp_ms: 1_700_000_000_000 + i,
  };
}

class FakeStorage {
  private map = new Map<string, string>();
  getItem(key: string) { return this.map.get(key) ?? null; }
  setItem(key: string, value: string) { this.map.set(key, value); }
  removeItem(key: string) { this.map.delete(key); }
}

function okResponse(accepted: number) {
  return new Response(JSON.stringify({ accepted, rejected: [] }), {
    status: 200,
    headers: { "Content-Type": "application/json" },
  });
}

describe("uploader", () => {
  it("posts one batch per block to /api/trials", async () => {
    const calls: { url: string; body: unknown }[] = [];
    const uploader = new Uploader("http://collector", {
      fetchFn: async (url, init) => {
        calls.push({ url: String(url), body: JSON.parse(String(init?.body)) });
        return okResponse(19);
      },
    });
    const result = await uploader.uploadBlock(Array.from({ length: 19 }, (_, i) => record(i)));
    expect(result.accepted).toBe(19);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://collector/api/trials");
    expect((calls[0].body as { schema_version: number }).schema_version).toBe(1);
  });

  it("retries transient failures with backoff and then succeeds", async () => {
    let attempts = 0;
    const waits: number[] = [];
    const uploader = new Uploader("http://collector", {
      fetchFn: async () => {
        attempts += 1;
        if (attempts < 3) throw new TypeError("network down");
        return okResponse(5);
      },
      sleep: async (ms) => { waits.push(ms); },
      backoffMs: 100,
    });
    const result = await uploader.uploadBlock([record(0)]);
    expect(result.accepted).toBe(5);
    expect(attempts).toBe(3);
    expect(waits).toEqual([100, 200]);
  });

  it("stashes records locally after exhausting retries and retries them later", async () => {
    const storage = new FakeStorage();
    let down = true;
    const uploader = new Uploader("http://collector", {
      fetchFn: async () => {
        if (down) throw new TypeError("network down");
        return okResponse(2);
      },
      storage,
      maxAttempts: 2,
      sleep: async () => {},
    });
    await expect(uploader.uploadBlock([record(0), record(1)])).rejects.toThrow(/failed after 2/);
    expect(uploader.pending()).toHaveLength(2);

    down = false;
    const recovered = await uploader.retryPending();
    expect(recovered).toBe(2);
    expect(uploader.pending()).toHaveLength(0);
  });

  it("treats 5xx as transient but 4xx as permanent", async () => {
    let attempts = 0;
    const uploader = new Uploader("http://collector", {
      fetchFn: async () => {
        attempts += 1;
        return new Response("{}", { status: attempts === 1 ? 503 : 400 });
      },
      maxAttempts: 3,
      sleep: async () => {},
    });
    await expect(uploader.uploadBlock([record(0)])).rejects.toThrow();
    expect(attempts).toBe(2); // 503 retried once, 400 aborts
  });

  it("exports the shared line-delimited format", () => {
    const uploader = new Uploader("http://collector", { fetchFn: async () => okResponse(0) });
    const text = uploader.exportLines([record(0)], [5.0, 1.25, 2.5, 10.0]);
    const lines = text.trim().split("\n");
    expect(lines).toHaveLength(2);
    const header = JSON.parse(lines[0]);
    expect(header.kind).toBe("trial-log");
    expect(header.durations).toEqual([1.25, 2.5, 5.0, 10.0]);
    const parsed = JSON.parse(lines[1]);
    expect(Object.keys(parsed)).toEqual([
      "subject", "phase", "stimulus", "duration", "choice",
      "success", "block", "trial_in_block", "timestamp_ms",
    ]);
  });
});
