import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { bitsFromIndex, clauseSatisfied, countSatisfied, indexFromBits, solves } from "../src/model.js";
import type { ClauseSpec, PuzzleSpec } from "../src/types.js";

interface ClauseCase {
  clause: ClauseSpec;
  assignment: number;
  satisfied: boolean;
}

const fixtureUrl = new URL("../../shared/clause_cases.json", import.meta.url);
const fixture = JSON.parse(readFileSync(fileURLToPath(fixtureUrl), "utf-8")) as {
  kind: string;
  cases: ClauseCase[];
};

describe("assignment encoding", () => {
  it("round-trips all eight indices", () => {
    for (let index = 0; index < 8; index++) {
      expect(indexFromBits(bitsFromIndex(index))).toBe(index);
    }
  });

  it("uses bit i for variable i", () => {
    expect(bitsFromIndex(1)).toEqual([true, false, false]);
    expect(bitsFromIndex(4)).toEqual([false, false, true]);
    expect(bitsFromIndex(7)).toEqual([true, true, true]);
  });

  it("rejects out-of-range indices", () => {
    expect(() => bitsFromIndex(8)).toThrow();
    expect(() => bitsFromIndex(-1)).toThrow();
  });
});

describe("clause satisfaction against the shared fixture", () => {
  it("agrees with the analysis toolkit on all 96 cases", () => {
    expect(fixture.kind).toBe("clause-cases");
    expect(fixture.cases).toHaveLength(96);
    for (const c of fixture.cases) {
      const bits = bitsFromIndex(c.assignment);
      expect(clauseSatisfied(c.clause, bits), JSON.stringify(c)).toBe(c.satisfied);
    }
  });
});

describe("puzzle counting", () => {
  // (a|b)(a|~b)(b|c)(b|~c)(c|a)(c|~a): unique solution TTT
  const reference: PuzzleSpec = {
    id: 0,
    solution: 7,
    clauses: [
      [[0, true], [1, true]],
      [[0, true], [1, false]],
      [[1, true], [2, true]],
      [[1, true], [2, false]],
      [[2, true], [0, true]],
      [[2, true], [0, false]],
    ],
  };

  it("solution satisfies all six clauses", () => {
    expect(countSatisfied(reference, bitsFromIndex(7))).toBe(6);
    expect(solves(reference, bitsFromIndex(7))).toBe(true);
  });

  it("all-false satisfies exactly three", () => {
    expect(countSatisfied(reference, bitsFromIndex(0))).toBe(3);
  });

  it("the solution is unique over the eight assignments", () => {
    const solutions = [];
    for (let a = 0; a < 8; a++) {
      if (solves(reference, bitsFromIndex(a))) solutions.push(a);
    }
    expect(solutions).toEqual([7]);
  });
});
