// Batched trial upload with retry, backoff, and a local fallback
// queue for network loss.  The collector deduplicates on
// (subject, block, trial_in_block), so re-sending after a partial
// failure is always safe.

import { SCHEMA_VERSION, type TrialRecord, type UploadResult } from "./types.js";

export interface UploaderOptions {
  fetchFn?: typeof fetch;
  storage?: Pick<Storage, "getItem" | "setItem" | "removeItem">;
  maxAttempts?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const PENDING_KEY = "boundedchoice-pending-trials";

export class PermanentUploadError extends Error {}

export class Uploader {
  private baseUrl: string;
  private fetchFn: typeof fetch;
  private storage?: Pick<Storage, "getItem" | "setItem" | "removeItem">;
  private maxAttempts: number;
  private backoffMs: number;
  private sleep: (ms: number) => Promise<void>;
  rejectedTotal = 0;
  acceptedTotal = 0;

  constructor(baseUrl: string, options: UploaderOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.storage = options.storage;
    this.maxAttempts = options.maxAttempts ?? 5;
    this.backoffMs = options.backoffMs ?? 500;
    this.sleep = options.sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
  }

  /** POST one block of records; retries transient failures with backoff.
   * A 4xx answer is permanent (bad payload): surfaced immediately, no retry. */
  async uploadBlock(records: TrialRecord[]): Promise<UploadResult> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      if (attempt > 0) await this.sleep(this.backoffMs * 2 ** (attempt - 1));
      try {
        const response = await this.fetchFn(`${this.baseUrl}/api/trials`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ schema_version: SCHEMA_VERSION, records }),
        });
        if (response.status >= 500) {
          lastError = new Error(`server error ${response.status}`);
          continue;
        }
        if (!response.ok) {
          throw new PermanentUploadError(`upload rejected with status ${response.status}`);
        }
        const result = (await response.json()) as UploadResult;
        this.acceptedTotal += result.accepted;
        this.rejectedTotal += result.rejected.length;
        return result;
      } catch (error) {
        if (error instanceof PermanentUploadError) throw error;
        lastError = error;
      }
    }
    this.stashLocally(records);
    throw new Error(`upload failed after ${this.maxAttempts} attempts: ${lastError}`);
  }

  /** Re-send anything stashed by earlier failures; keeps what still fails. */
  async retryPending(): Promise<number> {
    const pending = this.pending();
    if (pending.length === 0) return 0;
    this.storage?.removeItem(PENDING_KEY);
    try {
      const result = await this.uploadBlock(pending);
      return result.accepted;
    } catch (error) {
      // uploadBlock re-stashed them
      throw error;
    }
  }

  pending(): TrialRecord[] {
    const raw = this.storage?.getItem(PENDING_KEY);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as TrialRecord[];
    } catch {
      return [];
    }
  }

  /** Line-delimited export of all records, the offline fallback format. */
  exportLines(records: TrialRecord[], durations: number[]): string {
    const header = JSON.stringify({
      kind: "trial-log",
      schema_version: SCHEMA_VERSION,
      durations: [...durations].sort((a, b) => a - b),
    });
    const lines = records.map((r) =>
      JSON.stringify({
        subject: r.subject,
        phase: r.phase,
        stimulus: r.stimulus,
        duration: r.duration,
        choice: r.choice,
        success: r.success,
        block: r.block,
        trial_in_block: r.trial_in_block,
        timestamp_ms: r.timestamp_ms,
      }),
    );
    return [header, ...lines].join("\n") + "\n";
  }

  private stashLocally(records: TrialRecord[]): void {
    if (!this.storage) return;
    const merged = [...this.pending(), ...records];
    this.storage.setItem(PENDING_KEY, JSON.stringify(merged));
  }
}
