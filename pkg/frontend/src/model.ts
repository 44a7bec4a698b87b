// Puzzle semantics mirrored from the analysis toolkit: assignments are
// indexed 0..7 with bit i holding variable i, black = true.

import type { ClauseSpec, PuzzleSpec } from "./types.js";

export const N_VARIABLES = 3;
export const N_CLAUSES = 6;

export type Bits = [boolean, boolean, boolean];

export function bitsFromIndex(index: number): Bits {
  if (!Number.isInteger(index) || index < 0 || index > 7) {
    throw new Error(`assignment index ${index} out of range 0..7`);
  }
  return [(index & 1) !== 0, (index & 2) !== 0, (index & 4) !== 0];
}

export function indexFromBits(bits: Bits): number {
  return (bits[0] ? 1 : 0) | (bits[1] ? 2 : 0) | (bits[2] ? 4 : 0);
}

export function clauseSatisfied(clause: ClauseSpec, bits: Bits): boolean {
  return clause.some(([variable, polarity]) => bits[variable] === polarity);
}

export function countSatisfied(puzzle: PuzzleSpec, bits: Bits): number {
  let n = 0;
  for (const clause of puzzle.clauses) {
    if (clauseSatisfied(clause, bits)) n += 1;
  }
  return n;
}

export function solves(puzzle: PuzzleSpec, bits: Bits): boolean {
  return countSatisfied(puzzle, bits) === N_CLAUSES;
}
