"""Service operations shared by the HTTP routes and the CLI.

The CLI is a thin client over these functions (plus file I/O and
manifests); the FastAPI routes are thin wrappers exposing the same
operations over HTTP.
"""

from __future__ import annotations

import numpy as np

from .. import curves, fitting, puzzles, simulate
from ..empirical import TrialRecord, build_table
from ..errors import ConfigError
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CurveRowModel,
    FitRequest,
    FitResponse,
    FixtureModel,
    GeneratePuzzlesRequest,
    SimulateRequest,
    SimulateResponse,
    SubjectSession,
    TrialRecordModel,
)


def record_to_model(record: TrialRecord) -> TrialRecordModel:
    return TrialRecordModel(
        subject=record.subject, phase=record.phase, stimulus=record.stimulus,
        duration=record.duration, choice=record.choice, success=record.success,
        block=record.block, trial_in_block=record.trial_in_block,
        timestamp_ms=record.timestamp_ms,
    )


def record_from_model(model: TrialRecordModel) -> TrialRecord:
    return TrialRecord(
        subject=model.subject, phase=model.phase, stimulus=model.stimulus,
        duration=model.duration, choice=model.choice, success=model.success,
        block=model.block, trial_in_block=model.trial_in_block,
        timestamp_ms=model.timestamp_ms,
    )


def generate_puzzles(req: GeneratePuzzlesRequest) -> dict:
    stimuli = puzzles.build_stimulus_set(req.seed, count=req.count)
    return puzzles.stimulus_set_to_dict(stimuli)


def _fixture_from_model(fixture: FixtureModel) -> puzzles.StimulusSet:
    return puzzles.stimulus_set_from_dict(fixture.model_dump())


def run_simulation(req: SimulateRequest) -> SimulateResponse:
    stimuli = _fixture_from_model(req.fixture)
    solutions = stimuli.solutions()
    if req.design is not None:
        design = simulate.design_from_dict(req.design)
    else:
        design = simulate.default_experiment_design(
            trained_ids=stimuli.trained_ids, control_id=stimuli.control_id
        )
    if req.agent is not None:
        agent, _ = fitting.model_from_dict(req.agent)
    else:
        agent = simulate.make_agent(design, req.seed, solutions=solutions)
    sessions = []
    for i in range(req.subjects):
        subject = f"s{i + 1:02d}"
        records = simulate.sample_trials(
            agent, design, req.seed + i, subject=subject, solutions=solutions
        )
        sessions.append(SubjectSession(
            subject=subject, records=[record_to_model(r) for r in records]
        ))
    return SimulateResponse(
        design=simulate.design_to_dict(design),
        agent=fitting.model_to_dict(agent),
        sessions=sessions,
    )


def fit_records(req: FitRequest) -> FitResponse:
    records = [record_from_model(m) for m in req.records]
    test_records = [r for r in records if r.phase == "test"]
    if not test_records:
        raise ConfigError("no test-phase records to fit")

    durations = sorted({r.duration for r in test_records})
    if req.fixture is not None:
        stimuli_set = _fixture_from_model(req.fixture)
        stimuli = list(stimuli_set.ids)
        if req.exclude_control:
            stimuli = [x for x in stimuli if x != stimuli_set.control_id]
    else:
        if req.exclude_control:
            raise ConfigError("exclude_control needs the fixture to know the control id")
        stimuli = sorted({r.stimulus for r in test_records})

    table = build_table(
        records, "test", stimuli, durations, ignore_unlisted=req.exclude_control
    )
    config = fitting.FitConfig(
        max_iterations=req.settings.max_iterations,
        tolerance=req.settings.tolerance,
        eta0=req.settings.eta0,
        tau=req.settings.tau,
        seed=req.settings.seed,
        beta_floor=req.settings.beta_floor,
    )
    model, report = fitting.fit(table, config, kind=req.kind)
    return FitResponse(decomposition=fitting.model_to_dict(model, report))


def analyze_model(req: AnalyzeRequest) -> AnalyzeResponse:
    model, _ = fitting.model_from_dict(req.decomposition)
    stimuli_set = _fixture_from_model(req.fixture)
    solutions = stimuli_set.solutions()
    if not req.include_control and stimuli_set.control_id in model.stimuli:
        model = curves.restrict_to_stimuli(
            model, [x for x in model.stimuli if x != stimuli_set.control_id]
        )
    p_x = None
    if req.stimulus_probs is not None:
        p_x = np.asarray(req.stimulus_probs, dtype=float)
    grid = curves.default_beta_grid() if req.beta_grid is None else np.asarray(req.beta_grid, dtype=float)
    config = curves.CurveConfig(
        beta_grid=grid,
        stimulus_distribution=p_x,
        include_control=req.include_control,
    )
    points, asymptote = curves.sweep(model, config, solutions)
    rows = [CurveRowModel(**row) for row in curves.curves_to_rows(points, asymptote)]
    return AnalyzeResponse(rows=rows)
