"""Pydantic request/response models for the HTTP service.

These are the wire contract shared with the browser experiment UI; the
trial record schema here matches the line format of trial files
field-for-field.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class TrialRecordModel(BaseModel):
    subject: str = Field(min_length=1)
    phase: Literal["training", "test"]
    stimulus: int = Field(ge=0)
    duration: float = Field(gt=0)
    choice: int = Field(ge=0, le=7)
    success: bool
    block: int = Field(ge=0)
    trial_in_block: int = Field(ge=0)
    timestamp_ms: int = Field(ge=0)


class TrialBatchRequest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    # records stay raw dicts so one malformed record is rejected alone,
    # not the whole batch
    records: list[dict]


class RejectedRecord(BaseModel):
    index: int
    reason: str


class TrialUploadResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    accepted: int
    rejected: list[RejectedRecord]


class HealthResponse(BaseModel):
    status: str
    version: str
    schema_version: int = SCHEMA_VERSION


class PuzzleModel(BaseModel):
    id: int
    clauses: list[list[list[Any]]]  # 6 x 2 x [variable, polarity]
    solution: int = Field(ge=0, le=7)


class FixtureModel(BaseModel):
    kind: Literal["puzzle-fixture"] = "puzzle-fixture"
    schema_version: int = SCHEMA_VERSION
    seed: int
    control_id: int
    control_of: int
    puzzles: list[PuzzleModel]


class GeneratePuzzlesRequest(BaseModel):
    count: int = Field(default=5, ge=2)
    seed: int = 0


class FitSettingsModel(BaseModel):
    max_iterations: int = 100_000
    tolerance: float = 1e-11
    eta0: float = 1.0
    tau: float = 1e5
    seed: int = 0
    beta_floor: float = 1e-8


class SimulateRequest(BaseModel):
    fixture: FixtureModel
    seed: int = 0
    subjects: int = Field(default=1, ge=1)
    design: Optional[dict] = None  # experiment-design document; defaults to the standard protocol
    agent: Optional[dict] = None   # decomposition-model document; defaults to a seeded agent


class SubjectSession(BaseModel):
    subject: str
    records: list[TrialRecordModel]


class SimulateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    design: dict
    agent: dict
    sessions: list[SubjectSession]


class FitRequest(BaseModel):
    records: list[TrialRecordModel]
    kind: Literal["gibbs", "softmax"] = "gibbs"
    fixture: Optional[FixtureModel] = None
    exclude_control: bool = False
    settings: FitSettingsModel = Field(default_factory=FitSettingsModel)


class FitResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    decomposition: dict  # decomposition-model document, fit report included


class AnalyzeRequest(BaseModel):
    decomposition: dict
    fixture: FixtureModel
    include_control: bool = False
    beta_grid: Optional[list[float]] = None
    stimulus_probs: Optional[list[float]] = None


class CurveRowModel(BaseModel):
    beta: float
    expected_utility: float
    mutual_information_bits: float
    percent_correct: float
    is_asymptote: bool


class AnalyzeResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    rows: list[CurveRowModel]
