"""FastAPI application: trial collector plus compute endpoints.

The collector is the bridge to the browser experiment UI: it serves
the puzzle fixture and the UI's static assets, and appends uploaded
trial batches to a line-delimited log.  Appends are guarded by a
single lock and flushed once per batch, so concurrent uploads never
interleave.  Records are validated one by one; a bad record is
rejected with a field-level reason without failing its batch.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from .. import __version__
from ..empirical import TRIALS_SCHEMA_VERSION, load_trials, trials_header_line
from ..errors import BoundedChoiceError, TrialFormatError
from ..puzzles import StimulusSet, load_stimulus_set, stimulus_set_to_dict
from . import ops
from .schemas import (
    SCHEMA_VERSION,
    AnalyzeRequest,
    AnalyzeResponse,
    FitRequest,
    FitResponse,
    FixtureModel,
    GeneratePuzzlesRequest,
    HealthResponse,
    RejectedRecord,
    SimulateRequest,
    SimulateResponse,
    TrialBatchRequest,
    TrialRecordModel,
    TrialUploadResponse,
)

logger = logging.getLogger(__name__)

# Session durations the collector accepts (test durations plus training).
DEFAULT_DURATIONS = [1.25, 2.5, 5.0, 10.0]


class CollectorState:
    """Single-writer trial sink with (subject, block, trial) idempotency."""

    def __init__(self, fixture: StimulusSet, out_path: Path, durations: list[float],
                 fatal_handler=None):
        self.fixture = fixture
        self.out_path = Path(out_path)
        self.durations = [float(d) for d in durations]
        self.lock = threading.Lock()
        self.seen_keys: set[tuple[str, int, int]] = set()
        self._fatal_handler = fatal_handler or self._default_fatal
        self._load_existing()

    @staticmethod
    def _default_fatal(exc: OSError):
        logger.critical("cannot append to trial log: %s; aborting", exc)
        os._exit(2)

    def _load_existing(self) -> None:
        if not self.out_path.exists():
            return
        try:
            for record in load_trials(self.out_path):
                self.seen_keys.add((record.subject, record.block, record.trial_in_block))
        except TrialFormatError as exc:
            raise BoundedChoiceError(
                f"existing trial log {self.out_path} is invalid: {exc}"
            ) from exc

    def validate_record(self, index: int, raw: dict) -> TrialRecordModel | RejectedRecord:
        try:
            record = TrialRecordModel.model_validate(raw)
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(p) for p in first["loc"]) or "(record)"
            return RejectedRecord(index=index, reason=f"field '{field}': {first['msg']}")
        if record.stimulus not in self.fixture.ids:
            return RejectedRecord(
                index=index,
                reason=f"field 'stimulus': {record.stimulus} not in fixture {self.fixture.ids}",
            )
        if record.duration not in self.durations:
            return RejectedRecord(
                index=index,
                reason=f"field 'duration': {record.duration} not in declared set {self.durations}",
            )
        return record

    def append_batch(self, records: list[TrialRecordModel]) -> tuple[int, list[RejectedRecord]]:
        """Validate duplicates and append all accepted records in one write."""
        accepted: list[TrialRecordModel] = []
        rejected: list[RejectedRecord] = []
        with self.lock:
            batch_keys: set[tuple[str, int, int]] = set()
            for i, record in enumerate(records):
                key = (record.subject, record.block, record.trial_in_block)
                if key in self.seen_keys or key in batch_keys:
                    rejected.append(RejectedRecord(
                        index=i, reason=f"duplicate record for (subject, block, trial) = {key}"
                    ))
                    continue
                batch_keys.add(key)
                accepted.append(record)
            if accepted:
                lines = []
                if not self.out_path.exists():
                    lines.append(trials_header_line(self.durations))
                for record in accepted:
                    lines.append(json.dumps(record.model_dump()))
                payload = "\n".join(lines) + "\n"
                try:
                    with open(self.out_path, "a", encoding="utf-8") as fh:
                        fh.write(payload)
                        fh.flush()
                        os.fsync(fh.fileno())
                except OSError as exc:
                    self._fatal_handler(exc)
                    raise HTTPException(status_code=500, detail="trial log write failed") from exc
                self.seen_keys |= batch_keys
        return len(accepted), rejected


def create_app(
    fixture_path: str | Path | None = None,
    out_path: str | Path | None = None,
    *,
    static_dir: str | Path | None = None,
    durations: list[float] | None = None,
    fatal_handler=None,
) -> FastAPI:
    """Build the service; collector routes appear when fixture+out are given."""
    app = FastAPI(title="boundedchoice", version=__version__)

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__, schema_version=SCHEMA_VERSION)

    @app.post("/api/puzzles/generate", response_model=FixtureModel)
    def puzzles_generate(req: GeneratePuzzlesRequest) -> FixtureModel:
        return FixtureModel.model_validate(ops.generate_puzzles(req))

    @app.post("/api/simulate", response_model=SimulateResponse)
    def simulate_route(req: SimulateRequest) -> SimulateResponse:
        try:
            return ops.run_simulation(req)
        except BoundedChoiceError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/api/fit", response_model=FitResponse)
    def fit_route(req: FitRequest) -> FitResponse:
        try:
            return ops.fit_records(req)
        except BoundedChoiceError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/api/analyze", response_model=AnalyzeResponse)
    def analyze_route(req: AnalyzeRequest) -> AnalyzeResponse:
        try:
            return ops.analyze_model(req)
        except BoundedChoiceError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    if fixture_path is not None and out_path is not None:
        fixture = load_stimulus_set(fixture_path)
        state = CollectorState(
            fixture,
            Path(out_path),
            durations or DEFAULT_DURATIONS,
            fatal_handler=fatal_handler,
        )
        app.state.collector = state

        @app.get("/api/puzzles")
        def puzzles_fixture() -> dict:
            return stimulus_set_to_dict(state.fixture)

        @app.post("/api/trials", response_model=TrialUploadResponse)
        def upload_trials(batch: TrialBatchRequest) -> TrialUploadResponse:
            if batch.schema_version != TRIALS_SCHEMA_VERSION:
                raise HTTPException(
                    status_code=400,
                    detail=f"unsupported schema_version {batch.schema_version}",
                )
            valid: list[TrialRecordModel] = []
            rejected: list[RejectedRecord] = []
            index_map: list[int] = []
            for i, raw in enumerate(batch.records):
                outcome = state.validate_record(i, raw)
                if isinstance(outcome, RejectedRecord):
                    rejected.append(outcome)
                else:
                    valid.append(outcome)
                    index_map.append(i)
            n_written, dup_rejected = state.append_batch(valid)
            for dup in dup_rejected:
                dup.index = index_map[dup.index]
            rejected.extend(dup_rejected)
            rejected.sort(key=lambda r: r.index)
            return TrialUploadResponse(accepted=n_written, rejected=rejected)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
