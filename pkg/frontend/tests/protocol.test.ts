import { describe, expect, it } from "vitest";

import { bitsFromIndex, type Bits } from "../src/model.js";
import {
  DEFAULT_CONFIG,
  mulberry32,
  SessionEngine,
  validateConfig,
  type EngineEvent,
  type SessionConfig,
} from "../src/protocol.js";
import type { ClauseSpec, Fixture, TrialRecord } from "../src/types.js";

// A puzzle whose six clauses force every variable to the target bits,
// giving a unique solution without search.
function forcingPuzzle(id: number, solution: number): Fixture["puzzles"][number] {
  const bits = bitsFromIndex(solution);
  const clauses: ClauseSpec[] = [];
  const pairs: [number, number][] = [
    [0, 1], [0, 1],
    [1, 2], [1, 2],
    [2, 0], [2, 0],
  ];
  pairs.forEach(([v, w], i) => {
    clauses.push([[v, bits[v]], [w, i % 2 === 0]]);
  });
  return { id, clauses, solution };
}

function testFixture(): Fixture {
  const solutions = [3, 0, 6, 4];
  const puzzles = solutions.map((s, i) => forcingPuzzle(i, s));
  puzzles.push(forcingPuzzle(4, 7 - solutions[0]));
  return {
    kind: "puzzle-fixture",
    schema_version: 1,
    seed: 0,
    control_id: 4,
    control_of: 0,
    puzzles,
  };
}

function makeConfig(overrides: Partial<SessionConfig> = {}): SessionConfig {
  return { ...DEFAULT_CONFIG, subjectId: "t01", version: "A", ...overrides };
}

interface SessionRun {
  events: EngineEvent[];
  records: TrialRecord[];
  engine: SessionEngine;
}

/**
 * Drive a whole session headless with a fake monotonic clock.
 * The player chooses bits on every trial start.
 */
function runSession(
  fixture: Fixture,
  config: SessionConfig,
  player: (stimulus: number, engine: SessionEngine) => Bits,
  opts: { stepMs?: number; seed?: number; maxSteps?: number } = {},
): SessionRun {
  const engine = new SessionEngine(fixture, config, {
    rng: mulberry32(opts.seed ?? 1),
    epochMs: 1_700_000_000_000,
  });
  const stepMs = opts.stepMs ?? 5;
  const maxSteps = opts.maxSteps ?? 10_000_000;
  const seen: EngineEvent[] = [];
  let now = 1000;

  const absorb = (events: EngineEvent[]) => {
    for (const event of events) {
      seen.push(event);
      if (event.kind === "trial-started") {
        engine.setBits(player(event.stimulus, engine));
      }
    }
  };

  for (let step = 0; step < maxSteps; step++) {
    if (engine.status === "done") break;
    if (engine.status === "ready" || engine.status === "between-blocks") {
      absorb(engine.startBlock(now));
    } else {
      now += stepMs;
      absorb(engine.tick(now));
    }
  }
  expect(engine.status).toBe("done");
  return { events: seen, records: engine.records, engine };
}

const perfectPlayer = (fixture: Fixture) => (stimulus: number): Bits =>
  bitsFromIndex(fixture.puzzles.find((p) => p.id === stimulus)!.solution);

describe("session protocol", () => {
  // a short session keeps the fast tests fast
  const shortConfig = makeConfig({ trainingBlocks: 1, testBlocks: 3 });

  it("produces training blocks of 18 and test blocks of 19 with one control each", () => {
    const fixture = testFixture();
    const { records } = runSession(fixture, shortConfig, perfectPlayer(fixture));
    const training = records.filter((r) => r.phase === "training");
    const test = records.filter((r) => r.phase === "test");
    expect(training).toHaveLength(18);
    expect(test).toHaveLength(3 * 19);

    const byBlock = new Map<number, TrialRecord[]>();
    for (const r of test) {
      byBlock.set(r.block, [...(byBlock.get(r.block) ?? []), r]);
    }
    expect(byBlock.size).toBe(3);
    for (const blockRecords of byBlock.values()) {
      expect(blockRecords).toHaveLength(19);
      expect(blockRecords.filter((r) => r.stimulus === fixture.control_id)).toHaveLength(1);
      const indices = blockRecords.map((r) => r.trial_in_block).sort((a, b) => a - b);
      expect(indices).toEqual([...Array(19).keys()]);
    }
  });

  it("records stream in presentation order with gapless indices", () => {
    const fixture = testFixture();
    const { records } = runSession(fixture, shortConfig, perfectPlayer(fixture));
    let previousBlock = -1;
    let expectedIndex = 0;
    for (const r of records) {
      if (r.block !== previousBlock) {
        expect(r.block).toBe(previousBlock + 1);
        previousBlock = r.block;
        expectedIndex = 0;
      }
      expect(r.trial_in_block).toBe(expectedIndex);
      expectedIndex += 1;
    }
  });

  it("a perfect player passes with zero failures", () => {
    const fixture = testFixture();
    const { events, records } = runSession(fixture, shortConfig, perfectPlayer(fixture));
    expect(records.every((r) => r.success)).toBe(true);
    const finishes = events.filter((e) => e.kind === "block-finished");
    expect(finishes.every((e) => e.kind === "block-finished" && !e.repeat)).toBe(true);
  });

  it("flags and repeats a block after more than six failures", () => {
    const fixture = testFixture();
    const solve = perfectPlayer(fixture);
    let failuresToInject = 7;
    const flakyPlayer = (stimulus: number): Bits => {
      const correct = solve(stimulus);
      if (failuresToInject > 0) {
        failuresToInject -= 1;
        return [!correct[0], correct[1], correct[2]];
      }
      return correct;
    };
    const config = makeConfig({ trainingBlocks: 1, testBlocks: 1 });
    const { events, records } = runSession(fixture, config, flakyPlayer);
    const finishes = events.filter(
      (e): e is Extract<EngineEvent, { kind: "block-finished" }> => e.kind === "block-finished",
    );
    // training block fails 7 times, repeats once, then everything passes
    expect(finishes[0].repeat).toBe(true);
    expect(finishes[0].failures).toBe(7);
    expect(finishes).toHaveLength(3);
    expect(finishes.slice(1).every((e) => !e.repeat)).toBe(true);
    // repeated block keeps its records under a fresh block index
    expect(records.filter((r) => r.block === finishes[0].block)).toHaveLength(18);
    const blocks = new Set(records.map((r) => r.block));
    expect(blocks.size).toBe(3);
  });

  it("exactly six failures does not trigger a repeat", () => {
    const fixture = testFixture();
    const solve = perfectPlayer(fixture);
    let failuresToInject = 6;
    const config = makeConfig({ trainingBlocks: 1, testBlocks: 1 });
    const { events } = runSession(fixture, config, (stimulus) => {
      const correct = solve(stimulus);
      if (failuresToInject > 0) {
        failuresToInject -= 1;
        return [!correct[0], correct[1], correct[2]];
      }
      return correct;
    });
    const finishes = events.filter(
      (e): e is Extract<EngineEvent, { kind: "block-finished" }> => e.kind === "block-finished",
    );
    expect(finishes).toHaveLength(2);
    expect(finishes.every((e) => !e.repeat)).toBe(true);
  });

  it("draws test durations from the declared set without disclosure before the cue", () => {
    const fixture = testFixture();
    const { events, records } = runSession(fixture, shortConfig, perfectPlayer(fixture));
    const allowed = new Set(shortConfig.testDurationsSec);
    for (const r of records.filter((r) => r.phase === "test")) {
      expect(allowed.has(r.duration)).toBe(true);
    }
    const starts = events.filter((e) => e.kind === "trial-started");
    for (const start of starts) {
      expect("duration" in start).toBe(false);
      expect("durationSec" in start).toBe(false);
    }
    // all three durations actually occur across 57 test trials
    const seen = new Set(records.filter((r) => r.phase === "test").map((r) => r.duration));
    expect(seen.size).toBe(3);
  });

  it("fires the cue one second before lock, within one display frame", () => {
    const fixture = testFixture();
    const engine = new SessionEngine(
      fixture,
      makeConfig({ trainingBlocks: 1, testBlocks: 1 }),
      { rng: mulberry32(9), epochMs: 1_700_000_000_000 },
    );
    const frameMs = 1000 / 60;
    let now = 0;
    let trialStart = 0;
    let cueAt: number | null = null;
    const durations: { cueError: number; lockError: number; duration: number }[] = [];

    const absorb = (events: EngineEvent[]) => {
      for (const event of events) {
        if (event.kind === "trial-started") {
          trialStart = now;
          cueAt = null;
          engine.setBits(bitsFromIndex(
            fixture.puzzles.find((p) => p.id === event.stimulus)!.solution));
        } else if (event.kind === "cue") {
          cueAt = event.atMs;
        } else if (event.kind === "trial-locked") {
          const durationMs = event.record.duration * 1000;
          expect(cueAt).not.toBeNull();
          durations.push({
            cueError: Math.abs(cueAt! - (trialStart + durationMs - 1000)),
            lockError: Math.abs(now - (trialStart + durationMs)),
            duration: event.record.duration,
          });
        }
      }
    };

    while (engine.status !== "done") {
      if (engine.status === "ready" || engine.status === "between-blocks") {
        absorb(engine.startBlock(now));
      } else {
        now += 5;
        absorb(engine.tick(now));
      }
    }
    expect(durations.length).toBe(18 + 19);
    for (const d of durations) {
      expect(d.cueError).toBeLessThanOrEqual(frameMs);
      expect(d.lockError).toBeLessThanOrEqual(50);
    }
  });

  it("records the center state at lock time", () => {
    const fixture = testFixture();
    const config = makeConfig({ trainingBlocks: 1, testBlocks: 1 });
    const engine = new SessionEngine(fixture, config, {
      rng: mulberry32(3),
      epochMs: 1_700_000_000_000,
    });
    let now = 0;
    engine.startBlock(now);
    // set an arbitrary pattern mid-trial, then change it; the last one wins
    engine.setBits([true, false, false]);
    now += 200;
    engine.tick(now);
    engine.setBits([false, true, true]);
    let locked: TrialRecord | null = null;
    while (!locked) {
      now += 5;
      for (const event of engine.tick(now)) {
        if (event.kind === "trial-locked") locked = event.record;
      }
    }
    expect(locked.choice).toBe(6); // bits (F,T,T) -> index 6
    // toggles after lock are ignored
    engine.toggle(0);
    expect(engine.records[0].choice).toBe(6);
  });

  it("rejects configurations where a duration does not exceed the cue lead", () => {
    expect(() => validateConfig(makeConfig({ testDurationsSec: [1.25, 1.0] })))
      .toThrow(/cue lead/);
    expect(() => validateConfig(makeConfig({ trainingDurationSec: 0.5 })))
      .toThrow(/cue lead/);
  });

  it("version B is a render-level flag only: records are color-free", () => {
    const fixture = testFixture();
    const configA = makeConfig({ trainingBlocks: 1, testBlocks: 1, version: "A" });
    const configB = makeConfig({ trainingBlocks: 1, testBlocks: 1, version: "B" });
    const runA = runSession(fixture, configA, perfectPlayer(fixture), { seed: 5 });
    const runB = runSession(fixture, configB, perfectPlayer(fixture), { seed: 5 });
    expect(runB.records).toEqual(runA.records);
  });
});
