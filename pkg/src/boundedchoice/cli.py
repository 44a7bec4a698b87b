"""Command-line surface: a thin client over the service operations.

Every command writes a run manifest next to its outputs.  Exit codes:
0 success, 1 validation problem, 2 runtime failure.  All randomness
flows from explicit --seed flags; reruns with the same arguments
produce byte-identical outputs (manifest timestamps aside).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import uvicorn
from pydantic import ValidationError

from . import __version__, curves, empirical
from .errors import BoundedChoiceError
from .manifest import RunManifest
from .puzzles import load_stimulus_set
from .service import ops
from .service.app import DEFAULT_DURATIONS, create_app
from .service.schemas import (
    AnalyzeRequest,
    FitRequest,
    FitSettingsModel,
    FixtureModel,
    GeneratePuzzlesRequest,
    SimulateRequest,
)

CONFIG_DIR_ENV = "BOUNDEDCHOICE_CONFIG_DIR"


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fixture_model(path: Path) -> FixtureModel:
    return FixtureModel.model_validate(json.loads(path.read_text(encoding="utf-8")))


def _fit_settings_defaults() -> FitSettingsModel:
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        candidate = Path(config_dir) / "fit.json"
        if candidate.exists():
            return FitSettingsModel.model_validate(
                json.loads(candidate.read_text(encoding="utf-8"))
            )
    return FitSettingsModel()


@click.group()
@click.version_option(version=__version__)
def cli():
    """Bounded-rational choice toolkit."""


@cli.command("gen-puzzles")
@click.option("--count", type=int, default=5, show_default=True,
              help="Stimuli to generate; the last one is the control.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
def cmd_gen_puzzles(count: int, seed: int, out_path: Path):
    """Generate a unique-solution puzzle fixture."""
    if count < 2:
        raise click.UsageError("--count must be at least 2 (one trained puzzle plus the control)")
    manifest = RunManifest(command="gen-puzzles", arguments={"count": count, "seed": seed},
                           seed=seed)
    fixture = ops.generate_puzzles(GeneratePuzzlesRequest(count=count, seed=seed))
    _write_json(out_path, fixture)
    manifest.add_output(out_path)
    manifest.write(out_path.with_name(out_path.name + ".manifest.json"))
    click.echo(f"wrote {count} puzzles to {out_path}")


@cli.command("simulate")
@click.option("--fixture", "fixture_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--design", "design_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--agent", "agent_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--subjects", type=int, default=15, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
def cmd_simulate(fixture_path: Path, design_path: Path | None, agent_path: Path | None,
                 subjects: int, seed: int, out_dir: Path):
    """Sample synthetic sessions from a ground-truth agent."""
    manifest = RunManifest(
        command="simulate",
        arguments={"subjects": subjects, "seed": seed,
                   "design": str(design_path) if design_path else None,
                   "agent": str(agent_path) if agent_path else None},
        seed=seed,
    )
    manifest.add_input(fixture_path)
    req = SimulateRequest(
        fixture=_fixture_model(fixture_path),
        seed=seed,
        subjects=subjects,
        design=json.loads(design_path.read_text()) if design_path else None,
        agent=json.loads(agent_path.read_text()) if agent_path else None,
    )
    resp = ops.run_simulation(req)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "design.json", resp.design)
    _write_json(out_dir / "agent.json", resp.agent)
    manifest.add_output(out_dir / "design.json")
    manifest.add_output(out_dir / "agent.json")
    durations = sorted(set(resp.design["durations"]) | {resp.design["training_duration"]})
    for session in resp.sessions:
        path = out_dir / f"{session.subject}.trials.jsonl"
        records = [ops.record_from_model(m) for m in session.records]
        empirical.save_trials(path, records, durations)
        manifest.add_output(path)
    manifest.write(out_dir / "run_manifest.json")
    click.echo(f"wrote {subjects} session file(s) to {out_dir}")


@cli.command("fit")
@click.argument("trial_files", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
@click.option("--fixture", "fixture_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--kind", type=click.Choice(["gibbs", "softmax"]), default="gibbs", show_default=True)
@click.option("--exclude-control", is_flag=True, default=False,
              help="Drop control-stimulus trials from the table.")
@click.option("--max-iterations", type=int, default=None)
@click.option("--tolerance", type=float, default=None)
@click.option("--eta0", type=float, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
def cmd_fit(trial_files: tuple[Path, ...], fixture_path: Path, kind: str,
            exclude_control: bool, max_iterations, tolerance, eta0, tau, seed,
            out_dir: Path):
    """Fit the decomposition to one or more subjects' trial files."""
    settings = _fit_settings_defaults()
    overrides = {k: v for k, v in {
        "max_iterations": max_iterations, "tolerance": tolerance,
        "eta0": eta0, "tau": tau, "seed": seed,
    }.items() if v is not None}
    settings = settings.model_copy(update=overrides)

    manifest = RunManifest(
        command="fit",
        arguments={"kind": kind, "exclude_control": exclude_control,
                   "settings": settings.model_dump(),
                   "trial_files": [str(p) for p in trial_files]},
        seed=settings.seed,
    )
    manifest.add_input(fixture_path)
    fixture_model = _fixture_model(fixture_path)
    stimuli_set = load_stimulus_set(fixture_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    docs = []
    for path in trial_files:
        manifest.add_input(path)
        records = empirical.load_trials(path, fixture=stimuli_set)
        resp = ops.fit_records(FitRequest(
            records=[ops.record_to_model(r) for r in records],
            kind=kind,
            fixture=fixture_model,
            exclude_control=exclude_control,
            settings=settings,
        ))
        stem = path.name.split(".")[0]
        model_path = out_dir / f"{stem}.model.json"
        _write_json(model_path, resp.decomposition)
        manifest.add_output(model_path)
        docs.append(resp.decomposition)
        click.echo(f"{path}: J = {resp.decomposition['report']['final_j_bits']:.6g} bits "
                   f"({resp.decomposition['report']['iterations_used']} iterations)")

    if len(docs) > 1:
        betas = np.array([d["betas"] for d in docs])
        utilities = np.array([d["utilities"] for d in docs])
        j_bits = np.array([d["report"]["final_j_bits"] for d in docs])
        summary = {
            "kind": "fit-summary",
            "schema_version": 1,
            "n_subjects": len(docs),
            "durations": docs[0]["durations"],
            "stimuli": docs[0]["stimuli"],
            "betas_mean": betas.mean(axis=0).tolist(),
            "betas_std": betas.std(axis=0).tolist(),
            "utilities_mean": utilities.mean(axis=0).tolist(),
            "utilities_std": utilities.std(axis=0).tolist(),
            "final_j_bits_mean": float(j_bits.mean()),
            "final_j_bits_std": float(j_bits.std()),
        }
        _write_json(out_dir / "summary.json", summary)
        manifest.add_output(out_dir / "summary.json")
        click.echo(f"mean J = {summary['final_j_bits_mean']:.6g} "
                   f"± {summary['final_j_bits_std']:.2g} bits over {len(docs)} subjects")
    manifest.write(out_dir / "run_manifest.json")


@cli.command("analyze")
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--fixture", "fixture_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--include-control", is_flag=True, default=False)
@click.option("--grid-min", type=float, default=1e-2, show_default=True)
@click.option("--grid-max", type=float, default=1e3, show_default=True)
@click.option("--grid-points", type=int, default=60, show_default=True)
@click.option("--px", "px_text", type=str, default=None,
              help="Comma-separated stimulus distribution overriding the model's marginal.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
def cmd_analyze(model_path: Path, fixture_path: Path, include_control: bool,
                grid_min: float, grid_max: float, grid_points: int,
                px_text: str | None, out_path: Path):
    """Sweep performance curves over an inverse-temperature grid."""
    manifest = RunManifest(
        command="analyze",
        arguments={"include_control": include_control, "grid_min": grid_min,
                   "grid_max": grid_max, "grid_points": grid_points, "px": px_text},
    )
    manifest.add_input(model_path)
    manifest.add_input(fixture_path)
    grid = [0.0] + list(np.logspace(np.log10(grid_min), np.log10(grid_max), grid_points))
    resp = ops.analyze_model(AnalyzeRequest(
        decomposition=json.loads(model_path.read_text(encoding="utf-8")),
        fixture=_fixture_model(fixture_path),
        include_control=include_control,
        beta_grid=grid,
        stimulus_probs=[float(v) for v in px_text.split(",")] if px_text else None,
    ))
    out_path.write_text(
        curves.format_curves_csv([row.model_dump() for row in resp.rows]), encoding="utf-8"
    )
    manifest.add_output(out_path)
    manifest.write(out_path.with_name(out_path.name + ".manifest.json"))
    click.echo(f"wrote {len(resp.rows)} curve rows to {out_path}")


@cli.command("collect")
@click.option("--bind", type=str, default="127.0.0.1:8765", show_default=True,
              help="host:port to serve on.")
@click.option("--fixture", "fixture_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--static-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Experiment UI build to serve at /.")
@click.option("--durations", "durations_text", type=str,
              default=",".join(str(d) for d in DEFAULT_DURATIONS), show_default=True,
              help="Comma-separated durations the collector accepts.")
def cmd_collect(bind: str, fixture_path: Path, out_path: Path,
                static_dir: Path | None, durations_text: str):
    """Run the trial collector (and experiment UI host) until interrupted."""
    host, _, port_text = bind.partition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--bind must look like host:port, got {bind!r}")
    durations = [float(d) for d in durations_text.split(",")]
    app = create_app(fixture_path, out_path, static_dir=static_dir, durations=durations)
    manifest = RunManifest(
        command="collect",
        arguments={"bind": bind, "fixture": str(fixture_path), "out": str(out_path),
                   "static_dir": str(static_dir) if static_dir else None,
                   "durations": durations},
    )
    manifest.add_input(fixture_path)
    manifest.write(out_path.with_name(out_path.name + ".manifest.json"))
    uvicorn.run(app, host=host, port=int(port_text), log_level="info")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except (BoundedChoiceError, ValidationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # runtime failures: bad I/O, divergence, ...
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
