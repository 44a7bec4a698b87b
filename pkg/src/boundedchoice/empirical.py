"""Trial ingestion and smoothed empirical choice distributions.

Trial files are line-delimited UTF-8 JSON: a header object first
(kind/schema_version/durations), then one record per line.  Tables use
add-one smoothing over the full stimulus x duration x choice grid, so
every conditional is strictly positive and well defined even for
never-observed cells.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch, TrialFormatError
from .puzzles import N_ASSIGNMENTS, StimulusSet

logger = logging.getLogger(__name__)

TRIALS_SCHEMA_VERSION = 1

PHASES = ("training", "test")

# Order in which record fields are written; keeps files byte-reproducible.
_RECORD_FIELDS = (
    "subject", "phase", "stimulus", "duration", "choice",
    "success", "block", "trial_in_block", "timestamp_ms",
)


@dataclass(frozen=True)
class TrialRecord:
    """One observed trial: who saw what, for how long, and what they chose."""

    subject: str
    phase: str
    stimulus: int
    duration: float
    choice: int
    success: bool
    block: int
    trial_in_block: int
    timestamp_ms: int

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if self.choice not in range(N_ASSIGNMENTS):
            raise ConfigError(f"choice {self.choice} out of range 0..{N_ASSIGNMENTS - 1}")

    def to_json_line(self) -> str:
        data = {name: getattr(self, name) for name in _RECORD_FIELDS}
        return json.dumps(data)


def _parse_record(data: dict, declared_durations: set[float] | None) -> TrialRecord:
    problems = []
    for name in _RECORD_FIELDS:
        if name not in data:
            problems.append(f"missing field '{name}'")
    if problems:
        raise ValueError("; ".join(problems))
    phase = data["phase"]
    if phase not in PHASES:
        raise ValueError(f"field 'phase': {phase!r} is not one of {PHASES}")
    choice = data["choice"]
    if not isinstance(choice, int) or choice not in range(N_ASSIGNMENTS):
        raise ValueError(f"field 'choice': {choice!r} out of range 0..{N_ASSIGNMENTS - 1}")
    duration = float(data["duration"])
    if declared_durations is not None and duration not in declared_durations:
        raise ValueError(
            f"field 'duration': {duration!r} not in declared set {sorted(declared_durations)}"
        )
    return TrialRecord(
        subject=str(data["subject"]),
        phase=phase,
        stimulus=int(data["stimulus"]),
        duration=duration,
        choice=choice,
        success=bool(data["success"]),
        block=int(data["block"]),
        trial_in_block=int(data["trial_in_block"]),
        timestamp_ms=int(data["timestamp_ms"]),
    )


def load_trials(
    source,
    *,
    fixture: StimulusSet | None = None,
    declared_durations: list[float] | None = None,
) -> list[TrialRecord]:
    """Parse a trial stream (path, text, or binary/text file object).

    Durations are validated against the header's declared set unless
    ``declared_durations`` overrides it.  All malformed lines are
    collected and raised together as :class:`TrialFormatError` with
    line numbers.  When a ``fixture`` is given, the success flag is
    recomputed from it; mismatches are logged as warnings, with the
    fixture value kept.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, io.TextIOBase):
        text = source.read()
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    lines = text.splitlines()
    if not lines:
        return []

    problems: list[str] = []
    durations: set[float] | None = None
    start = 0
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        header = None
    if isinstance(header, dict) and header.get("kind") == "trial-log":
        start = 1
        if header.get("schema_version") != TRIALS_SCHEMA_VERSION:
            problems.append(f"line 1: unsupported schema_version {header.get('schema_version')!r}")
        durations = {float(d) for d in header.get("durations", [])} or None
    if declared_durations is not None:
        durations = {float(d) for d in declared_durations}

    solutions = fixture.solutions() if fixture is not None else None
    records: list[TrialRecord] = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            if not isinstance(data, dict):
                raise ValueError("record is not a JSON object")
            record = _parse_record(data, durations)
        except (ValueError, TypeError) as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        if solutions is not None:
            if record.stimulus not in solutions:
                problems.append(f"line {lineno}: field 'stimulus': {record.stimulus} not in fixture")
                continue
            true_success = record.choice == solutions[record.stimulus]
            if true_success != record.success:
                logger.warning(
                    "line %d: success flag %s disagrees with fixture (stimulus %d, choice %d); "
                    "using recomputed value",
                    lineno, record.success, record.stimulus, record.choice,
                )
                record = TrialRecord(
                    subject=record.subject, phase=record.phase, stimulus=record.stimulus,
                    duration=record.duration, choice=record.choice, success=true_success,
                    block=record.block, trial_in_block=record.trial_in_block,
                    timestamp_ms=record.timestamp_ms,
                )
        records.append(record)
    if problems:
        raise TrialFormatError(problems)
    return records


def save_trials(path: str | Path, records: list[TrialRecord], durations: list[float]) -> None:
    """Write a trial file: header line then one JSON record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trials_header_line(durations) + "\n")
        for record in records:
            fh.write(record.to_json_line() + "\n")


def trials_header_line(durations: list[float]) -> str:
    return json.dumps({
        "kind": "trial-log",
        "schema_version": TRIALS_SCHEMA_VERSION,
        "durations": [float(d) for d in sorted(durations)],
    })


# ---------------------------------------------------------------------------
# Smoothed empirical tables
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalTable:
    """Smoothed joint P(x, r, y) with derived marginals and conditionals.

    Count-built tables satisfy joint = (counts + 1) / sum(counts + 1)
    exactly.  Analytic tables (from the simulator) set ``counts`` to
    None and carry an exact joint directly.
    """

    stimuli: list[int]
    durations: list[float]
    joint: np.ndarray  # (X, R, Y)
    counts: np.ndarray | None = None
    p_xr: np.ndarray = field(init=False)
    p_x: np.ndarray = field(init=False)
    p_y: np.ndarray = field(init=False)
    conditionals: np.ndarray = field(init=False)  # (X, R, Y), rows P(y|x,r)

    def __post_init__(self):
        self.joint = np.asarray(self.joint, dtype=float)
        expected = (len(self.stimuli), len(self.durations), self.joint.shape[-1])
        if self.joint.shape != expected:
            raise DimensionMismatch(f"joint shape {self.joint.shape}, expected {expected}")
        total = float(self.joint.sum())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"joint sums to {total!r}, expected 1 within 1e-9")
        self.p_xr = self.joint.sum(axis=2)
        self.p_x = self.p_xr.sum(axis=1)
        self.p_y = self.joint.sum(axis=(0, 1))
        self.conditionals = self.joint / self.p_xr[:, :, None]

    @property
    def n_choices(self) -> int:
        return self.joint.shape[-1]

    def x_index(self, stimulus: int) -> int:
        try:
            return self.stimuli.index(stimulus)
        except ValueError:
            raise ConfigError(f"stimulus {stimulus} not in table grid {self.stimuli}") from None

    def r_index(self, duration: float) -> int:
        try:
            return self.durations.index(float(duration))
        except ValueError:
            raise ConfigError(f"duration {duration} not in table grid {self.durations}") from None

    def conditional(self, stimulus: int, duration: float) -> np.ndarray:
        """P(y | x, r) for one grid cell."""
        return self.conditionals[self.x_index(stimulus), self.r_index(duration)].copy()

    def prior(self) -> np.ndarray:
        """P(y), the choice marginal over the whole grid."""
        return self.p_y.copy()

    def stimulus_marginal(self) -> np.ndarray:
        """P(x)."""
        return self.p_x.copy()

    def to_dict(self) -> dict:
        data = {
            "kind": "empirical-table",
            "schema_version": 1,
            "stimuli": list(self.stimuli),
            "durations": [float(d) for d in self.durations],
            "n_choices": self.n_choices,
        }
        if self.counts is not None:
            data["counts"] = self.counts.tolist()
        else:
            data["joint"] = self.joint.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalTable":
        if data.get("kind") != "empirical-table":
            raise ConfigError("not an empirical-table document")
        stimuli = [int(x) for x in data["stimuli"]]
        durations = [float(r) for r in data["durations"]]
        if "counts" in data:
            counts = np.asarray(data["counts"], dtype=np.int64)
            return cls.from_counts(stimuli, durations, counts)
        joint = np.asarray(data["joint"], dtype=float)
        return cls(stimuli=stimuli, durations=durations, joint=joint, counts=None)

    @classmethod
    def from_counts(cls, stimuli, durations, counts) -> "EmpiricalTable":
        counts = np.asarray(counts, dtype=np.int64)
        smoothed = (counts + 1).astype(float)
        joint = smoothed / smoothed.sum()
        return cls(stimuli=list(stimuli), durations=list(durations), joint=joint, counts=counts)


def build_table(
    trials: list[TrialRecord],
    phase: str,
    stimuli: list[int],
    durations: list[float],
    *,
    n_choices: int = N_ASSIGNMENTS,
    ignore_unlisted: bool = False,
) -> EmpiricalTable:
    """Count phase-filtered trials onto the grid and smooth.

    Every kept trial must fall on the declared grid unless
    ``ignore_unlisted`` is set (used when the control stimulus is
    deliberately excluded).  Zero trials yield the uniform joint.
    """
    if not stimuli or not durations:
        raise ConfigError("stimulus and duration grids must be nonempty")
    if phase not in PHASES:
        raise ConfigError(f"phase must be one of {PHASES}, got {phase!r}")
    x_index = {x: i for i, x in enumerate(stimuli)}
    r_index = {float(r): i for i, r in enumerate(durations)}
    counts = np.zeros((len(stimuli), len(durations), n_choices), dtype=np.int64)
    for t in trials:
        if t.phase != phase:
            continue
        xi = x_index.get(t.stimulus)
        ri = r_index.get(t.duration)
        if xi is None or ri is None:
            if ignore_unlisted:
                continue
            raise ConfigError(
                f"trial (stimulus={t.stimulus}, duration={t.duration}) is off the declared grid"
            )
        counts[xi, ri, t.choice] += 1
    return EmpiricalTable.from_counts(stimuli, durations, counts)


def entropy_bits(probs) -> float:
    """Shannon entropy -sum p log2 p with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float)
    mask = p > 0
    return float(-np.sum(p[mask] * np.log2(p[mask])))
