// Session state machine: blocks, hidden per-trial durations, the
// end-of-trial cue, and the failure/repeat rule.
//
// The engine is driven entirely by tick(nowMs) with an injected
// monotonic clock and RNG, so tests can run a whole session headless
// and the browser layer stays a thin shell.  The drawn duration is
// engine-internal state: nothing duration-dependent is exposed to the
// renderer before the cue event fires.

import { indexFromBits, solves, type Bits } from "./model.js";
import type { Fixture, Phase, PuzzleSpec, TrialRecord } from "./types.js";

export interface SessionConfig {
  subjectId: string;
  version: "A" | "B"; // B renders all colors inverted
  trainingBlocks: number;
  testBlocks: number;
  trainingBlockSize: number;
  testBlockRegular: number; // regular trials per test block; one control trial is added
  trainingDurationSec: number;
  testDurationsSec: number[];
  interTrialRangeSec: [number, number];
  failureThreshold: number; // block repeats when failures exceed this
  cueLeadSec: number;
  stimulusWeights?: number[]; // presentation weights over trained puzzles, fixture order
  practiceFeedback?: boolean; // satisfaction feedback, demo mode only
}

export const DEFAULT_CONFIG: Omit<SessionConfig, "subjectId" | "version"> = {
  trainingBlocks: 5,
  testBlocks: 15,
  trainingBlockSize: 18,
  testBlockRegular: 18,
  trainingDurationSec: 10.0,
  testDurationsSec: [1.25, 2.5, 5.0],
  interTrialRangeSec: [0.5, 1.5],
  failureThreshold: 6,
  cueLeadSec: 1.0,
  stimulusWeights: [0.48, 0.24, 0.16, 0.12],
  practiceFeedback: false,
};

export type EngineEvent =
  | { kind: "block-started"; block: number; phase: Phase }
  | {
      kind: "trial-started";
      block: number;
      trialInBlock: number;
      stimulus: number;
      arrangement: number[];
    }
  | { kind: "cue"; atMs: number }
  | { kind: "trial-locked"; record: TrialRecord }
  | { kind: "block-finished"; block: number; phase: Phase; failures: number; repeat: boolean }
  | { kind: "session-finished" };

export type EngineStatus =
  | "ready"
  | "running"
  | "between-trials"
  | "between-blocks"
  | "done";

interface ActiveTrial {
  stimulus: number;
  durationSec: number;
  arrangement: number[];
  startMs: number;
  cueAtMs: number;
  lockAtMs: number;
  cueFired: boolean;
  trialInBlock: number;
}

export class SessionEngine {
  readonly config: SessionConfig;
  readonly records: TrialRecord[] = [];
  readonly events: EngineEvent[] = [];

  private fixture: Fixture;
  private rng: () => number;
  private epochMs: number;
  private originMs: number | null = null;

  private status_: EngineStatus = "ready";
  private blockIndex = -1; // global, monotone across phases and repeats
  private trainingDone = 0;
  private testDone = 0;
  private phase: Phase = "training";
  private trialInBlock = 0;
  private blockFailures = 0;
  private controlPosition = -1;
  private trial: ActiveTrial | null = null;
  private nextTrialAtMs = 0;
  private bits: Bits = [false, false, false];

  constructor(fixture: Fixture, config: SessionConfig, opts: { rng: () => number; epochMs: number }) {
    validateConfig(config);
    this.fixture = fixture;
    this.config = config;
    this.rng = opts.rng;
    this.epochMs = opts.epochMs;
  }

  get status(): EngineStatus {
    return this.status_;
  }

  get version(): "A" | "B" {
    return this.config.version;
  }

  currentBits(): Bits {
    return [...this.bits] as Bits;
  }

  currentTrial(): { stimulus: number; arrangement: number[] } | null {
    if (!this.trial) return null;
    return { stimulus: this.trial.stimulus, arrangement: [...this.trial.arrangement] };
  }

  /** Subject-initiated: blocks start whenever the participant is ready. */
  startBlock(nowMs: number): EngineEvent[] {
    if (this.status_ !== "ready" && this.status_ !== "between-blocks") {
      throw new Error(`cannot start a block while ${this.status_}`);
    }
    if (this.originMs === null) this.originMs = nowMs;
    this.blockIndex += 1;
    this.phase = this.trainingDone < this.config.trainingBlocks ? "training" : "test";
    this.trialInBlock = 0;
    this.blockFailures = 0;
    this.controlPosition =
      this.phase === "test" ? Math.floor(this.rng() * this.blockSize("test")) : -1;
    const out: EngineEvent[] = [
      { kind: "block-started", block: this.blockIndex, phase: this.phase },
    ];
    out.push(this.beginTrial(nowMs));
    this.emit(out);
    return out;
  }

  /** Toggle one center circle; ignored outside a running trial. */
  toggle(variable: 0 | 1 | 2): void {
    if (this.status_ !== "running") return;
    this.bits[variable] = !this.bits[variable];
  }

  setBits(bits: Bits): void {
    if (this.status_ !== "running") return;
    this.bits = [...bits] as Bits;
  }

  /** Advance the clock; returns whatever happened. */
  tick(nowMs: number): EngineEvent[] {
    const out: EngineEvent[] = [];
    if (this.status_ === "running" && this.trial) {
      if (!this.trial.cueFired && nowMs >= this.trial.cueAtMs) {
        this.trial.cueFired = true;
        out.push({ kind: "cue", atMs: nowMs });
      }
      if (nowMs >= this.trial.lockAtMs) {
        out.push(...this.lockTrial());
      }
    }
    if (this.status_ === "between-trials" && nowMs >= this.nextTrialAtMs) {
      out.push(this.beginTrial(nowMs));
    }
    this.emit(out);
    return out;
  }

  private blockSize(phase: Phase): number {
    return phase === "training"
      ? this.config.trainingBlockSize
      : this.config.testBlockRegular + 1;
  }

  private trainedIds(): number[] {
    return this.fixture.puzzles
      .map((p) => p.id)
      .filter((id) => id !== this.fixture.control_id);
  }

  private pickStimulus(): number {
    const trained = this.trainedIds();
    const weights = this.config.stimulusWeights ?? trained.map(() => 1);
    let total = 0;
    for (let i = 0; i < trained.length; i++) total += weights[i] ?? 0;
    let draw = this.rng() * total;
    for (let i = 0; i < trained.length; i++) {
      draw -= weights[i] ?? 0;
      if (draw <= 0) return trained[i];
    }
    return trained[trained.length - 1];
  }

  private drawArrangement(): number[] {
    const perm = [0, 1, 2, 3, 4, 5];
    for (let i = perm.length - 1; i > 0; i--) {
      const j = Math.floor(this.rng() * (i + 1));
      [perm[i], perm[j]] = [perm[j], perm[i]];
    }
    return perm;
  }

  private beginTrial(nowMs: number): EngineEvent {
    const isControl = this.phase === "test" && this.trialInBlock === this.controlPosition;
    const stimulus = isControl ? this.fixture.control_id : this.pickStimulus();
    const durationSec =
      this.phase === "training"
        ? this.config.trainingDurationSec
        : this.config.testDurationsSec[
            Math.floor(this.rng() * this.config.testDurationsSec.length)
          ];
    this.bits = [false, false, false];
    this.trial = {
      stimulus,
      durationSec,
      arrangement: this.drawArrangement(),
      startMs: nowMs,
      cueAtMs: nowMs + (durationSec - this.config.cueLeadSec) * 1000,
      lockAtMs: nowMs + durationSec * 1000,
      cueFired: false,
      trialInBlock: this.trialInBlock,
    };
    this.status_ = "running";
    return {
      kind: "trial-started",
      block: this.blockIndex,
      trialInBlock: this.trialInBlock,
      stimulus,
      arrangement: [...this.trial.arrangement],
    };
  }

  private lockTrial(): EngineEvent[] {
    const trial = this.trial!;
    const puzzle = this.puzzleById(trial.stimulus);
    const success = solves(puzzle, this.bits);
    if (!success) this.blockFailures += 1;
    const record: TrialRecord = {
      subject: this.config.subjectId,
      phase: this.phase,
      stimulus: trial.stimulus,
      duration: trial.durationSec,
      choice: indexFromBits(this.bits),
      success,
      block: this.blockIndex,
      trial_in_block: trial.trialInBlock,
      timestamp_ms: Math.round(this.epochMs + (trial.lockAtMs - (this.originMs ?? 0))),
    };
    this.records.push(record);
    this.trial = null;
    this.trialInBlock += 1;

    const out: EngineEvent[] = [{ kind: "trial-locked", record }];
    if (this.trialInBlock >= this.blockSize(this.phase)) {
      out.push(...this.finishBlock());
      return out;
    }
    const [lo, hi] = this.config.interTrialRangeSec;
    this.nextTrialAtMs = trial.lockAtMs + (lo + this.rng() * (hi - lo)) * 1000;
    this.status_ = "between-trials";
    return out;
  }

  private finishBlock(): EngineEvent[] {
    const repeat = this.blockFailures > this.config.failureThreshold;
    if (!repeat) {
      if (this.phase === "training") this.trainingDone += 1;
      else this.testDone += 1;
    }
    const out: EngineEvent[] = [{
      kind: "block-finished",
      block: this.blockIndex,
      phase: this.phase,
      failures: this.blockFailures,
      repeat,
    }];
    const sessionDone =
      this.trainingDone >= this.config.trainingBlocks &&
      this.testDone >= this.config.testBlocks;
    this.status_ = sessionDone ? "done" : "between-blocks";
    if (sessionDone) out.push({ kind: "session-finished" });
    return out;
  }

  private puzzleById(id: number): PuzzleSpec {
    const puzzle = this.fixture.puzzles.find((p) => p.id === id);
    if (!puzzle) throw new Error(`puzzle ${id} missing from fixture`);
    return puzzle;
  }

  private emit(events: EngineEvent[]): void {
    this.events.push(...events);
  }
}

export function validateConfig(config: SessionConfig): void {
  const durations = [config.trainingDurationSec, ...config.testDurationsSec];
  for (const d of durations) {
    if (!(d > 0)) throw new Error(`durations must be positive, got ${d}`);
    if (d <= config.cueLeadSec) {
      throw new Error(
        `duration ${d}s does not exceed the cue lead ${config.cueLeadSec}s`,
      );
    }
  }
  const [lo, hi] = config.interTrialRangeSec;
  if (!(lo >= 0 && hi >= lo)) throw new Error("inter-trial range must be ordered and nonnegative");
  if (config.failureThreshold < 0) throw new Error("failure threshold must be nonnegative");
  if (!config.subjectId) throw new Error("subjectId is required");
}

/** Deterministic RNG for tests and reproducible demo sessions. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
