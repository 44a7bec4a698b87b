// Wire types shared with the collector API (schema_version 1).

export const SCHEMA_VERSION = 1;

export type Phase = "training" | "test";

export interface TrialRecord {
  subject: string;
  phase: Phase;
  stimulus: number;
  duration: number; // seconds
  choice: number; // assignment index 0..7
  success: boolean;
  block: number;
  trial_in_block: number;
  timestamp_ms: number;
}

export interface UploadResult {
  accepted: number;
  rejected: { index: number; reason: string }[];
}

// [variable 0..2, polarity] pairs; two per clause, six clauses per puzzle
export type LiteralSpec = [number, boolean];
export type ClauseSpec = [LiteralSpec, LiteralSpec];

export interface PuzzleSpec {
  id: number;
  clauses: ClauseSpec[];
  solution: number;
}

export interface Fixture {
  kind: "puzzle-fixture";
  schema_version: number;
  seed: number;
  control_id: number;
  control_of: number;
  puzzles: PuzzleSpec[];
}
