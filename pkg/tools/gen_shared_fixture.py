#!/usr/bin/env python3
"""Regenerate shared/clause_cases.json: every clause type x assignment.

The browser task re-implements clause satisfaction for rendering and
local success checks; this fixture pins the two implementations to the
same 96 answers (12 clause types x 8 assignments).
"""

import json
from pathlib import Path

from boundedchoice.puzzles import N_ASSIGNMENTS, clause_family, clause_satisfied


def build_cases() -> list[dict]:
    cases = []
    for clause in clause_family():
        for assignment in range(N_ASSIGNMENTS):
            cases.append({
                "clause": [
                    [clause.first.variable, clause.first.polarity],
                    [clause.second.variable, clause.second.polarity],
                ],
                "assignment": assignment,
                "satisfied": clause_satisfied(clause, assignment),
            })
    return cases


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "shared" / "clause_cases.json"
    out.parent.mkdir(exist_ok=True)
    doc = {"kind": "clause-cases", "schema_version": 1, "cases": build_cases()}
    out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(doc['cases'])} cases to {out}")


if __name__ == "__main__":
    main()
