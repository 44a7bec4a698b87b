"""Performance measures as functions of the inverse temperature.

Given a fitted decomposition and a stimulus distribution P(x), sweeps
expected utility, mutual information between stimulus and choice (the
decision bandwidth), and the expected fraction of correct choices over
a beta grid, to extrapolate performance beyond the tested durations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .fitting import DecompositionModel, _conditionals
from .gibbs import LN2, PROB_FLOOR, as_distribution

ASYMPTOTE_BETA = 1e6  # stands in for the beta -> infinity limit


@dataclass(frozen=True)
class PerformancePoint:
    beta: float
    expected_utility: float
    mutual_information_bits: float
    percent_correct: float


@dataclass(frozen=True)
class CurveConfig:
    beta_grid: np.ndarray = field(default_factory=lambda: default_beta_grid())
    stimulus_distribution: np.ndarray | None = None  # defaults to the model's marginal
    include_control: bool = False

    def __post_init__(self):
        grid = np.asarray(self.beta_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigError("beta grid must be a nonempty 1-D array")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ConfigError("beta grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "beta_grid", grid)


def default_beta_grid() -> np.ndarray:
    """{0} followed by 60 log-spaced points from 1e-2 to 1e3."""
    return np.concatenate(([0.0], np.logspace(-2, 3, 60)))


def posteriors_at(model: DecompositionModel, beta: float) -> np.ndarray:
    """Q_beta(y|x) for every stimulus row, shape (X, Y)."""
    if beta < 0:
        raise ConfigError(f"beta must be nonnegative, got {beta}")
    if beta == 0.0:
        if model.kind == "gibbs":
            return np.tile(model.prior, (len(model.stimuli), 1))
        uniform = np.full(model.n_choices, 1.0 / model.n_choices)
        return np.tile(uniform, (len(model.stimuli), 1))
    return _conditionals(model.kind, model.prior, np.array([beta]), model.utilities)[:, 0, :]


def _resolve_px(model: DecompositionModel, p_x) -> np.ndarray:
    if p_x is None:
        if model.stimulus_marginal is None:
            raise ConfigError("no stimulus distribution given and none stored on the model")
        p_x = model.stimulus_marginal
    p_x = as_distribution(p_x, name="stimulus distribution")
    if len(p_x) != len(model.stimuli):
        raise DimensionMismatch(
            f"stimulus distribution has {len(p_x)} entries for {len(model.stimuli)} stimuli"
        )
    return p_x


def expected_utility_at(model: DecompositionModel, p_x, beta: float) -> float:
    """EU(beta) = sum_{x,y} P(x) Q_beta(y|x) U_x(y)."""
    p_x = _resolve_px(model, p_x)
    q = posteriors_at(model, beta)
    return float(p_x @ np.sum(q * model.utilities, axis=1))


def mutual_information_at(model: DecompositionModel, p_x, beta: float) -> float:
    """I(beta) = sum_{x,y} P(x) Q_beta(y|x) log2 [Q_beta(y|x) / Q_beta(y)] in bits.

    beta == 0 makes the choice independent of the stimulus, so the
    exact value 0.0 is returned without arithmetic.
    """
    p_x = _resolve_px(model, p_x)
    if beta == 0.0:
        return 0.0
    q = posteriors_at(model, beta)              # (X, Y)
    marginal = p_x @ q                          # (Y,)
    support = q > PROB_FLOOR
    ratio = np.ones_like(q)
    np.divide(q, marginal[None, :], out=ratio, where=support)
    per_x = np.sum(np.where(support, q * np.log(ratio), 0.0), axis=1)
    return float(p_x @ per_x) / LN2


def percent_correct_at(model: DecompositionModel, p_x, solutions: dict[int, int], beta: float) -> float:
    """sum_x P(x) Q_beta(y*(x)|x) where y*(x) is the puzzle solution."""
    p_x = _resolve_px(model, p_x)
    missing = [x for i, x in enumerate(model.stimuli) if p_x[i] > 0 and x not in solutions]
    if missing:
        raise ConfigError(f"no solution entry for stimuli {missing}")
    q = posteriors_at(model, beta)
    correct = np.array([
        q[i, solutions[x]] if x in solutions else 0.0
        for i, x in enumerate(model.stimuli)
    ])
    return float(p_x @ correct)


def sweep(
    model: DecompositionModel,
    config: CurveConfig,
    solutions: dict[int, int],
) -> tuple[list[PerformancePoint], PerformancePoint]:
    """One point per grid beta, plus the large-beta asymptote point."""
    p_x = _resolve_px(model, config.stimulus_distribution)

    def point(beta: float) -> PerformancePoint:
        return PerformancePoint(
            beta=float(beta),
            expected_utility=expected_utility_at(model, p_x, beta),
            mutual_information_bits=mutual_information_at(model, p_x, beta),
            percent_correct=percent_correct_at(model, p_x, solutions, beta),
        )

    points = [point(b) for b in config.beta_grid]
    return points, point(ASYMPTOTE_BETA)


def restrict_to_stimuli(model: DecompositionModel, keep_ids: list[int]) -> DecompositionModel:
    """Model restricted to a subset of stimuli, with P(x) renormalized.

    Used to drop the control stimulus before computing curves, per the
    stimulus-entropy bound convention.
    """
    idx = [model.x_index(x) for x in keep_ids]
    if not idx:
        raise ConfigError("cannot restrict model to an empty stimulus set")
    out = model.copy()
    out.stimuli = [model.stimuli[i] for i in idx]
    out.utilities = model.utilities[idx, :]
    if model.stimulus_marginal is not None:
        kept = model.stimulus_marginal[idx]
        total = kept.sum()
        if total <= 0:
            raise ConfigError("restricted stimulus marginal has zero mass")
        out.stimulus_marginal = kept / total
    return out


def curves_to_rows(points: list[PerformancePoint], asymptote: PerformancePoint) -> list[dict]:
    rows = []
    for p in points:
        rows.append({
            "beta": p.beta,
            "expected_utility": p.expected_utility,
            "mutual_information_bits": p.mutual_information_bits,
            "percent_correct": p.percent_correct,
            "is_asymptote": False,
        })
    rows.append({
        "beta": asymptote.beta,
        "expected_utility": asymptote.expected_utility,
        "mutual_information_bits": asymptote.mutual_information_bits,
        "percent_correct": asymptote.percent_correct,
        "is_asymptote": True,
    })
    return rows


def format_curves_csv(rows: list[dict]) -> str:
    """Tabular text, one row per grid point, suitable for external plotting."""
    header = "beta,expected_utility,mutual_information_bits,percent_correct,is_asymptote"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['beta']!r},{row['expected_utility']!r},"
            f"{row['mutual_information_bits']!r},{row['percent_correct']!r},"
            f"{str(row['is_asymptote']).lower()}"
        )
    return "\n".join(lines) + "\n"
