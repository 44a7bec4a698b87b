"""Synthetic bounded-rational agents and experiment designs.

The simulator is the verification oracle for the fitter: agents are
decomposition models used generatively, drawing i.i.d. choices from
their Gibbs posteriors per stimulus-duration cell.  Designs mirror the
experiment protocol (training blocks of 18 at a long fixed duration,
test blocks of 18 regular + 1 control trial, durations drawn per
trial) or, for recovery tests, a flat trials-per-cell grid.

Agent priors are made self-consistent: the prior equals the choice
marginal the agent itself induces under the design, which is what the
learned-from-experience prior means and what makes exact recovery from
analytic tables possible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .empirical import EmpiricalTable, TrialRecord
from .errors import ConfigError
from .fitting import DecompositionModel, GaugeSpec, _conditionals
from .puzzles import N_ASSIGNMENTS

DESIGN_SCHEMA_VERSION = 1

SIM_EPOCH_MS = 1_700_000_000_000  # synthetic session start; keeps outputs reproducible


@dataclass
class ExperimentDesign:
    """Stimulus/duration frequencies plus the block protocol constants."""

    stimuli: list[int]                 # grid order; includes the control when present
    stimulus_probs: np.ndarray         # P(x) for regular test trials (0 at the control)
    durations: list[float]             # test durations
    duration_probs: np.ndarray         # P(r), independent of x
    control_stimulus: int | None = None
    training_blocks: int = 5
    training_block_size: int = 18
    training_duration: float = 10.0
    test_blocks: int = 15
    test_block_regular: int = 18       # regular trials per test block; +1 control
    trials_per_cell: int | None = None  # set for flat-grid designs; overrides the protocol

    def __post_init__(self):
        self.stimulus_probs = np.asarray(self.stimulus_probs, dtype=float)
        self.duration_probs = np.asarray(self.duration_probs, dtype=float)
        if len(self.stimulus_probs) != len(self.stimuli):
            raise ConfigError("stimulus_probs length must match stimuli")
        if len(self.duration_probs) != len(self.durations):
            raise ConfigError("duration_probs length must match durations")
        for name, p in (("stimulus_probs", self.stimulus_probs), ("duration_probs", self.duration_probs)):
            if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
                raise ConfigError(f"{name} is not a probability vector")
        if self.control_stimulus is not None:
            ci = self.stimuli.index(self.control_stimulus)
            if self.stimulus_probs[ci] != 0.0:
                raise ConfigError("the control stimulus must have zero regular-trial probability")

    @property
    def trained_ids(self) -> list[int]:
        return [x for x in self.stimuli if x != self.control_stimulus]

    @property
    def test_block_size(self) -> int:
        return self.test_block_regular + (1 if self.control_stimulus is not None else 0)

    @property
    def test_trials(self) -> int:
        if self.trials_per_cell is not None:
            return self.trials_per_cell * len(self.stimuli) * len(self.durations)
        return self.test_blocks * self.test_block_size

    def joint_xr(self) -> np.ndarray:
        """Test-phase P(x, r) implied by the design, shape (X, R)."""
        if self.trials_per_cell is not None:
            cells = len(self.stimuli) * len(self.durations)
            return np.full((len(self.stimuli), len(self.durations)), 1.0 / cells)
        joint = np.outer(self.stimulus_probs, self.duration_probs)
        if self.control_stimulus is not None:
            regular = self.test_block_regular / self.test_block_size
            joint *= regular
            ci = self.stimuli.index(self.control_stimulus)
            joint[ci, :] = (1.0 - regular) * self.duration_probs
        return joint


def default_experiment_design(
    trained_ids: list[int] | None = None,
    control_id: int | None = 4,
) -> ExperimentDesign:
    """The default protocol: 4 trained stimuli with skewed frequencies
    (stimulus entropy 1.7925 bits), one control, durations 1.25/2.5/5 s
    uniform, 5x18 training at 10 s, 15x(18+1) test trials."""
    trained_ids = list(trained_ids) if trained_ids is not None else [0, 1, 2, 3]
    probs = [0.48, 0.24, 0.16, 0.12]
    if len(trained_ids) != len(probs):
        # spread a skewed geometric-ish profile over however many are given
        raw = np.array([2.0 ** -i for i in range(len(trained_ids))])
        probs = list(raw / raw.sum())
    stimuli = list(trained_ids)
    stimulus_probs = list(probs)
    if control_id is not None:
        stimuli.append(control_id)
        stimulus_probs.append(0.0)
    return ExperimentDesign(
        stimuli=stimuli,
        stimulus_probs=np.array(stimulus_probs),
        durations=[1.25, 2.5, 5.0],
        duration_probs=np.full(3, 1.0 / 3.0),
        control_stimulus=control_id,
    )


def design_to_dict(design: ExperimentDesign) -> dict:
    return {
        "kind": "experiment-design",
        "schema_version": DESIGN_SCHEMA_VERSION,
        "stimuli": list(design.stimuli),
        "stimulus_probs": design.stimulus_probs.tolist(),
        "durations": [float(d) for d in design.durations],
        "duration_probs": design.duration_probs.tolist(),
        "control_stimulus": design.control_stimulus,
        "training_blocks": design.training_blocks,
        "training_block_size": design.training_block_size,
        "training_duration": design.training_duration,
        "test_blocks": design.test_blocks,
        "test_block_regular": design.test_block_regular,
        "trials_per_cell": design.trials_per_cell,
    }


def design_from_dict(data: dict) -> ExperimentDesign:
    if data.get("kind") != "experiment-design":
        raise ConfigError("not an experiment-design document")
    if data.get("schema_version") != DESIGN_SCHEMA_VERSION:
        raise ConfigError(f"unsupported design schema_version {data.get('schema_version')!r}")
    return ExperimentDesign(
        stimuli=[int(x) for x in data["stimuli"]],
        stimulus_probs=np.asarray(data["stimulus_probs"], dtype=float),
        durations=[float(d) for d in data["durations"]],
        duration_probs=np.asarray(data["duration_probs"], dtype=float),
        control_stimulus=data.get("control_stimulus"),
        training_blocks=int(data.get("training_blocks", 5)),
        training_block_size=int(data.get("training_block_size", 18)),
        training_duration=float(data.get("training_duration", 10.0)),
        test_blocks=int(data.get("test_blocks", 15)),
        test_block_regular=int(data.get("test_block_regular", 18)),
        trials_per_cell=data.get("trials_per_cell"),
    )


def save_design(path: str | Path, design: ExperimentDesign) -> None:
    Path(path).write_text(json.dumps(design_to_dict(design), indent=2) + "\n", encoding="utf-8")


def load_design(path: str | Path) -> ExperimentDesign:
    return design_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Ground-truth agents
# ---------------------------------------------------------------------------

def loglinear_betas(durations: list[float], *, base: float = 1.0, slope: float = 1.2) -> np.ndarray:
    """Inverse temperatures linear in log duration, anchored at the shortest."""
    r = np.asarray(durations, dtype=float)
    return base + slope * np.log(r / r.min())


def self_consistent_prior(
    betas: np.ndarray,
    utilities: np.ndarray,
    joint_xr: np.ndarray,
    *,
    start: np.ndarray | None = None,
    tol: float = 1e-14,
    max_iterations: int = 100_000,
    damping: float = 0.5,
) -> np.ndarray:
    """Fixed point of prior == induced choice marginal.

    Iterates p <- (1-a) p + a * sum_{x,r} P(x,r) Gibbs(p, beta_r U_x)
    until the update is below ``tol`` in sup norm.
    """
    n = utilities.shape[1]
    p = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float).copy()
    for _ in range(max_iterations):
        q = _conditionals("gibbs", p, np.asarray(betas, dtype=float), utilities)
        marginal = np.einsum("xr,xry->y", joint_xr, q)
        updated = (1.0 - damping) * p + damping * marginal
        delta = float(np.max(np.abs(updated - p)))
        p = updated
        if delta < tol:
            return p / p.sum()
    raise ConfigError("self-consistent prior iteration did not converge")


def make_agent(
    design: ExperimentDesign,
    seed: int,
    *,
    solutions: dict[int, int] | None = None,
    betas_by_duration: dict[float, float] | None = None,
    beta_slope: float = 1.2,
    utility_range: tuple[float, float] | None = None,
    solution_bonus: float = 2.0,
    utility_noise: float = 0.4,
    max_logit_spread: float | None = 5.0,
    n_choices: int = N_ASSIGNMENTS,
) -> DecompositionModel:
    """Build a generative agent covering the design's durations.

    With ``utility_range`` set, utilities are i.i.d. uniform in that
    range (recovery-test agents).  Otherwise ``solutions`` must be
    given and utilities peak at each trained stimulus's solution, with
    a flatter profile on the control.  The prior is driven to the
    self-consistent fixed point under the design's test joint.

    ``max_logit_spread`` caps beta * (max U - min U) per stimulus by
    shrinking utility rows toward zero, which keeps every ground-truth
    posterior probability moderate (roughly >= 1e-3).  Without the cap
    a finite sample carries no usable signal about the utilities of
    deeply suppressed choices, and recovery tolerances become
    unattainable in principle.
    """
    rng = np.random.default_rng(seed)
    durations = list(design.durations)
    if design.trials_per_cell is None and design.training_duration not in durations:
        durations.append(design.training_duration)
    if betas_by_duration is not None:
        betas = np.array([betas_by_duration[d] for d in durations], dtype=float)
    else:
        betas = loglinear_betas(durations, slope=beta_slope)

    n_x = len(design.stimuli)
    if utility_range is not None:
        lo, hi = utility_range
        utilities = rng.uniform(lo, hi, size=(n_x, n_choices))
    else:
        if solutions is None:
            raise ConfigError("make_agent needs either utility_range or solutions")
        utilities = rng.normal(0.0, utility_noise, size=(n_x, n_choices))
        for i, x in enumerate(design.stimuli):
            if x == design.control_stimulus:
                utilities[i] *= 0.25  # comparatively flat profile on the untrained stimulus
            else:
                utilities[i, solutions[x]] += solution_bonus

    test_r_idx = [durations.index(d) for d in design.durations]
    if max_logit_spread is not None:
        beta_max = float(betas[test_r_idx].max())
        spread = utilities.max(axis=1) - utilities.min(axis=1)
        scale = np.minimum(1.0, max_logit_spread / np.maximum(beta_max * spread, 1e-12))
        utilities = utilities * scale[:, None]

    prior = self_consistent_prior(
        betas[test_r_idx], utilities, design.joint_xr()
    )
    model = DecompositionModel(
        kind="gibbs",
        stimuli=list(design.stimuli),
        durations=durations,
        prior=prior,
        betas=betas,
        utilities=utilities,
        gauge=GaugeSpec(anchor_duration=min(design.durations)),
        stimulus_marginal=design.joint_xr().sum(axis=1),
    )
    return model


def recovery_agent(
    design: ExperimentDesign,
    seed: int,
    *,
    betas_by_duration: dict[float, float],
    utility_range: tuple[float, float] = (-2.0, 2.0),
    max_logit_spread: float = 3.5,
    prior_concentration: float = 0.35,
    balance_tol: float = 1e-13,
) -> DecompositionModel:
    """Ground-truth agent built for exact-recovery tests.

    Utilities start from a uniform draw in ``utility_range``, tempered
    so no posterior probability collapses, then receive per-choice
    offsets balanced (fixed-point iteration on the log marginal) until
    the agent's prior equals the choice marginal it induces under the
    design's P(x,r).  That self-consistency is what makes the agent
    recoverable without bias: the fitter's prior is the empirical
    marginal, so the truth lies inside the fitted family only when
    prior and induced marginal agree.
    """
    rng = np.random.default_rng(seed)
    durations = list(design.durations)
    betas = np.array([betas_by_duration[d] for d in durations], dtype=float)
    n_x = len(design.stimuli)
    n_y = N_ASSIGNMENTS

    lo, hi = utility_range
    utilities = rng.uniform(lo, hi, size=(n_x, n_y))
    spread = utilities.max(axis=1) - utilities.min(axis=1)
    scale = np.minimum(1.0, max_logit_spread / np.maximum(betas.max() * spread, 1e-12))
    utilities *= scale[:, None]
    utilities -= utilities.mean(axis=1, keepdims=True)  # per-row shifts are gauge-free

    prior = np.exp(rng.normal(0.0, prior_concentration, n_y))
    prior /= prior.sum()

    joint = design.joint_xr()
    beta_bar = betas.mean()
    offsets = np.zeros(n_y)
    for _ in range(5000):
        q = _conditionals("gibbs", prior, betas, utilities + offsets[None, :])
        marginal = np.einsum("xr,xry->y", joint, q)
        log_ratio = np.log(prior / marginal)
        if np.abs(log_ratio).max() < balance_tol:
            break
        offsets += 0.8 * log_ratio / beta_bar
    else:
        raise ConfigError("marginal balancing did not converge")
    utilities = utilities + offsets[None, :]
    utilities -= utilities.mean(axis=1, keepdims=True)
    if np.abs(utilities).max() > max(abs(lo), abs(hi)):
        raise ConfigError("balanced utilities left the requested range; widen it or lower the spread cap")

    return DecompositionModel(
        kind="gibbs",
        stimuli=list(design.stimuli),
        durations=durations,
        prior=prior,
        betas=betas,
        utilities=utilities,
        gauge=GaugeSpec(anchor_duration=min(durations)),
        stimulus_marginal=joint.sum(axis=1),
    )


# ---------------------------------------------------------------------------
# Sampling and the infinite-data limit
# ---------------------------------------------------------------------------

def _agent_row(agent: DecompositionModel, stimulus: int, duration: float) -> np.ndarray:
    xi = agent.x_index(stimulus)
    try:
        ri = agent.durations.index(float(duration))
    except ValueError:
        raise ConfigError(f"agent has no beta for duration {duration}") from None
    return agent.conditionals()[xi, ri]


def sample_trials(
    agent: DecompositionModel,
    design: ExperimentDesign,
    seed: int,
    *,
    subject: str = "sim-00",
    solutions: dict[int, int] | None = None,
) -> list[TrialRecord]:
    """Draw one synthetic session (or one flat grid) of trials.

    Choices are i.i.d. per (x, r) cell from the agent's posterior.
    Success flags need the puzzle ``solutions`` map; without it every
    flag is False (and a fixture-aware loader would recompute them).
    Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    q_all = agent.conditionals()
    x_idx = {x: agent.x_index(x) for x in design.stimuli}
    r_idx = {}
    for d in set(design.durations) | {design.training_duration}:
        if float(d) in agent.durations:
            r_idx[float(d)] = agent.durations.index(float(d))
    choices = np.arange(agent.n_choices)

    records: list[TrialRecord] = []
    clock_ms = float(SIM_EPOCH_MS)

    def emit(phase: str, stimulus: int, duration: float, block: int, trial_in_block: int):
        nonlocal clock_ms
        if float(duration) not in r_idx:
            raise ConfigError(f"agent has no beta for duration {duration}")
        q = q_all[x_idx[stimulus], r_idx[float(duration)]]
        choice = int(rng.choice(choices, p=q))
        success = solutions is not None and choice == solutions.get(stimulus)
        records.append(TrialRecord(
            subject=subject, phase=phase, stimulus=stimulus, duration=float(duration),
            choice=choice, success=bool(success), block=block, trial_in_block=trial_in_block,
            timestamp_ms=int(clock_ms),
        ))
        clock_ms += duration * 1000.0 + rng.uniform(0.5, 1.5) * 1000.0

    if design.trials_per_cell is not None:
        n_seq = 0
        block_size = design.test_block_size
        for x in design.stimuli:
            for r in design.durations:
                q = q_all[x_idx[x], r_idx[float(r)]]
                drawn = rng.choice(choices, size=design.trials_per_cell, p=q)
                for c in drawn:
                    success = solutions is not None and int(c) == solutions.get(x)
                    records.append(TrialRecord(
                        subject=subject, phase="test", stimulus=x, duration=float(r),
                        choice=int(c), success=bool(success),
                        block=n_seq // block_size, trial_in_block=n_seq % block_size,
                        timestamp_ms=int(SIM_EPOCH_MS + n_seq),
                    ))
                    n_seq += 1
        return records

    trained = design.trained_ids
    trained_probs = design.stimulus_probs[[design.stimuli.index(x) for x in trained]]
    trained_probs = trained_probs / trained_probs.sum()
    block = 0
    for _ in range(design.training_blocks):
        for i in range(design.training_block_size):
            x = int(rng.choice(trained, p=trained_probs))
            emit("training", x, design.training_duration, block, i)
        block += 1
    for _ in range(design.test_blocks):
        size = design.test_block_size
        control_pos = int(rng.integers(0, size)) if design.control_stimulus is not None else -1
        for i in range(size):
            if i == control_pos:
                x = design.control_stimulus
            else:
                x = int(rng.choice(trained, p=trained_probs))
            r = float(rng.choice(design.durations, p=design.duration_probs))
            emit("test", x, r, block, i)
        block += 1
    return records


def analytic_table(agent: DecompositionModel, design: ExperimentDesign) -> EmpiricalTable:
    """The infinite-data limit: joint(x,r,y) = P(x,r) * Q_agent(y|x,r).

    Bypasses counts and smoothing entirely; the table's conditionals
    equal the agent's posteriors and its P(x,r) equals the design's.
    """
    r_indices = []
    for d in design.durations:
        try:
            r_indices.append(agent.durations.index(float(d)))
        except ValueError:
            raise ConfigError(f"agent has no beta for duration {d}") from None
    x_indices = [agent.x_index(x) for x in design.stimuli]
    q = agent.conditionals()[np.ix_(x_indices, r_indices)]      # (X, R, Y)
    joint = design.joint_xr()[:, :, None] * q
    return EmpiricalTable(
        stimuli=list(design.stimuli),
        durations=[float(d) for d in design.durations],
        joint=joint,
        counts=None,
    )
