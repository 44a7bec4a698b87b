"""2-CNF puzzle stimuli: 6 clauses, 2 literals per clause, 3 variables.

Assignments are indexed 0..7 with bit i holding variable i, so index
7 == (True, True, True).  The color convention used throughout the
toolkit is black == True, white == False.  Everything is checked by
exhaustive enumeration over the 8 assignments; the clause family under
the distinct-variable constraint has exactly 12 members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path

import numpy as np

from .errors import ConfigError

N_VARIABLES = 3
N_CLAUSES = 6
N_ASSIGNMENTS = 2 ** N_VARIABLES

FIXTURE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Literal:
    variable: int
    polarity: bool  # True = positive literal

    def __post_init__(self):
        if self.variable not in range(N_VARIABLES):
            raise ConfigError(f"variable index {self.variable} out of range")

    def evaluate(self, bits: tuple[bool, bool, bool]) -> bool:
        return bits[self.variable] == self.polarity

    def inverted(self) -> "Literal":
        return Literal(self.variable, not self.polarity)


@dataclass(frozen=True)
class Clause:
    first: Literal
    second: Literal

    def __post_init__(self):
        if self.first.variable == self.second.variable:
            raise ConfigError("clause literals must use two distinct variables")

    def inverted(self) -> "Clause":
        return Clause(self.first.inverted(), self.second.inverted())


@dataclass(frozen=True)
class Formula:
    clauses: tuple[Clause, ...]
    id: int = 0

    def __post_init__(self):
        if len(self.clauses) != N_CLAUSES:
            raise ConfigError(f"a formula needs exactly {N_CLAUSES} clauses, got {len(self.clauses)}")

    def inverted(self, new_id: int | None = None) -> "Formula":
        """Global polarity inversion (the 'colors inverted' transform).

        If the formula has the unique solution s, the inverted formula
        has the unique solution ~s.
        """
        return Formula(
            clauses=tuple(c.inverted() for c in self.clauses),
            id=self.id if new_id is None else new_id,
        )


def assignment_bits(index: int) -> tuple[bool, bool, bool]:
    """Bits of assignment ``index``; bit i is variable i."""
    if index not in range(N_ASSIGNMENTS):
        raise ConfigError(f"assignment index {index} out of range 0..7")
    return tuple(bool((index >> i) & 1) for i in range(N_VARIABLES))


def assignment_index(bits) -> int:
    bits = tuple(bool(b) for b in bits)
    if len(bits) != N_VARIABLES:
        raise ConfigError(f"need {N_VARIABLES} bits, got {len(bits)}")
    return sum(int(b) << i for i, b in enumerate(bits))


def clause_satisfied(clause: Clause, assignment: int) -> bool:
    """True iff at least one literal matches the assignment."""
    bits = assignment_bits(assignment)
    return clause.first.evaluate(bits) or clause.second.evaluate(bits)


def count_satisfied(formula: Formula, assignment: int) -> int:
    """Number of satisfied clauses, 0..6; a trial succeeds iff this is 6."""
    return sum(clause_satisfied(c, assignment) for c in formula.clauses)


def enumerate_solutions(formula: Formula) -> set[int]:
    """Exact solution set by testing all 8 assignments."""
    return {a for a in range(N_ASSIGNMENTS) if count_satisfied(formula, a) == N_CLAUSES}


def clause_family() -> list[Clause]:
    """All proper 2-SAT clauses over 3 variables: C(3,2) pairs x 4 polarities = 12."""
    family = []
    for v1, v2 in combinations(range(N_VARIABLES), 2):
        for p1, p2 in product((False, True), repeat=2):
            family.append(Clause(Literal(v1, p1), Literal(v2, p2)))
    return family


_MAX_REJECTION_DRAWS = 1_000_000


def generate_puzzle(seed: int, target_solution: int | None = None, *, id: int = 0) -> Formula:
    """Rejection-sample a formula with exactly one satisfying assignment.

    Draws 6 clauses i.i.d. uniform from the 12-member family and keeps
    the draw iff the solution set is exactly {target_solution} (or any
    singleton when no target is given).  Deterministic per seed; the
    result is re-verified by enumeration before being returned.
    """
    rng = np.random.default_rng(seed)
    family = clause_family()
    for _ in range(_MAX_REJECTION_DRAWS):
        picks = rng.integers(0, len(family), size=N_CLAUSES)
        formula = Formula(clauses=tuple(family[i] for i in picks), id=id)
        solutions = enumerate_solutions(formula)
        if len(solutions) != 1:
            continue
        if target_solution is not None and solutions != {target_solution}:
            continue
        return formula
    raise RuntimeError("rejection sampling failed to find a unique-solution formula")


def arrangement_for_trial(seed: int) -> tuple[int, ...]:
    """Uniform random permutation of the 6 patch positions, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return tuple(int(i) for i in rng.permutation(N_CLAUSES))


# ---------------------------------------------------------------------------
# Stimulus sets and fixture files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StimulusSet:
    """An ordered set of puzzles: trained ones first, control last.

    The control puzzle is the polarity inversion of the first trained
    puzzle (the one presented most often under the default design), so
    its solution is the bitwise complement of that puzzle's solution.
    """

    puzzles: tuple[Formula, ...]
    control_id: int
    control_of: int
    seed: int

    @property
    def trained_ids(self) -> list[int]:
        return [f.id for f in self.puzzles if f.id != self.control_id]

    @property
    def ids(self) -> list[int]:
        return [f.id for f in self.puzzles]

    def by_id(self, stimulus_id: int) -> Formula:
        for f in self.puzzles:
            if f.id == stimulus_id:
                return f
        raise ConfigError(f"unknown stimulus id {stimulus_id}")

    def solutions(self) -> dict[int, int]:
        out = {}
        for f in self.puzzles:
            sols = enumerate_solutions(f)
            if len(sols) != 1:
                raise ConfigError(f"stimulus {f.id} does not have a unique solution")
            out[f.id] = next(iter(sols))
        return out


def build_stimulus_set(seed: int, count: int = 5) -> StimulusSet:
    """Generate ``count`` unique-solution puzzles; the last is the control.

    Trained puzzles get distinct solutions drawn without replacement.
    The control (id count-1) is the inversion of trained puzzle 0.
    """
    if count < 2:
        raise ConfigError("a stimulus set needs at least one trained puzzle plus the control")
    rng = np.random.default_rng(seed)
    n_trained = count - 1
    targets = rng.choice(N_ASSIGNMENTS, size=min(n_trained, N_ASSIGNMENTS), replace=False)
    puzzles = []
    for i in range(n_trained):
        target = int(targets[i % len(targets)])
        puzzles.append(generate_puzzle(int(rng.integers(0, 2 ** 31)), target, id=i))
    control = puzzles[0].inverted(new_id=n_trained)
    puzzles.append(control)
    return StimulusSet(puzzles=tuple(puzzles), control_id=n_trained, control_of=0, seed=seed)


def stimulus_set_to_dict(stimuli: StimulusSet) -> dict:
    return {
        "kind": "puzzle-fixture",
        "schema_version": FIXTURE_SCHEMA_VERSION,
        "seed": stimuli.seed,
        "control_id": stimuli.control_id,
        "control_of": stimuli.control_of,
        "puzzles": [
            {
                "id": f.id,
                "clauses": [
                    [[c.first.variable, c.first.polarity], [c.second.variable, c.second.polarity]]
                    for c in f.clauses
                ],
                "solution": next(iter(enumerate_solutions(f))),
            }
            for f in stimuli.puzzles
        ],
    }


def stimulus_set_from_dict(data: dict) -> StimulusSet:
    if data.get("kind") != "puzzle-fixture":
        raise ConfigError("not a puzzle fixture document")
    if data.get("schema_version") != FIXTURE_SCHEMA_VERSION:
        raise ConfigError(f"unsupported fixture schema_version {data.get('schema_version')!r}")
    puzzles = []
    for p in data["puzzles"]:
        clauses = tuple(
            Clause(Literal(int(a[0]), bool(a[1])), Literal(int(b[0]), bool(b[1])))
            for a, b in p["clauses"]
        )
        formula = Formula(clauses=clauses, id=int(p["id"]))
        solutions = enumerate_solutions(formula)
        if solutions != {int(p["solution"])}:
            raise ConfigError(
                f"fixture puzzle {p['id']} declares solution {p['solution']} "
                f"but enumeration finds {sorted(solutions)}"
            )
        puzzles.append(formula)
    return StimulusSet(
        puzzles=tuple(puzzles),
        control_id=int(data["control_id"]),
        control_of=int(data["control_of"]),
        seed=int(data.get("seed", 0)),
    )


def save_stimulus_set(stimuli: StimulusSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(stimulus_set_to_dict(stimuli), indent=2) + "\n", encoding="utf-8")


def load_stimulus_set(path: str | Path) -> StimulusSet:
    return stimulus_set_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
