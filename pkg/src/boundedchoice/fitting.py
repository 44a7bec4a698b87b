"""Decomposition fitting: prior + duration-wise inverse temperatures + utilities.

Minimizes the average KL divergence between empirical conditionals
P(y|x,r) and model conditionals Q(y|x,r) over the inverse temperatures
beta(r) and the utility tables U_x(y), by full-batch gradient descent
with a decaying learning rate eta_t = eta0 / (1 + t/tau) (which
satisfies the Robbins-Monro conditions), projecting back onto a gauge-
fixed submanifold after every step.

The model family has two gauge freedoms that leave Q unchanged: a
joint rescaling beta -> beta/c, U -> c*U, and a per-stimulus constant
shift of U.  They are fixed by clamping beta at an anchor duration and
shifting each U_x so its certainty-equivalent at the anchor is zero.

Two model kinds share the machinery:

    gibbs:    Q(y|x,r) ~ P(y) * exp(beta(r) U_x(y))
    softmax:  Q(y|x,r) ~        exp(beta(r) U_x(y))

The objective is reported in bits; gradients are in nats (the bit
gradient is the same up to the constant 1/ln 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .empirical import EmpiricalTable
from .errors import ConfigError, DimensionMismatch, DivergenceError, GaugeError
from .gibbs import LN2, PROB_FLOOR

MODEL_SCHEMA_VERSION = 1

MODEL_KINDS = ("gibbs", "softmax")


@dataclass(frozen=True)
class GaugeSpec:
    """Which duration anchors the beta scale, and at what value."""

    anchor_duration: float
    beta0: float = 1.0

    def __post_init__(self):
        if self.beta0 <= 0:
            raise GaugeError(f"beta0 must be positive, got {self.beta0}")


@dataclass
class DecompositionModel:
    """A fitted (or ground-truth) decomposition of choice conditionals."""

    kind: str
    stimuli: list[int]
    durations: list[float]
    prior: np.ndarray        # (Y,)
    betas: np.ndarray        # (R,), nonnegative
    utilities: np.ndarray    # (X, Y)
    gauge: GaugeSpec
    stimulus_marginal: np.ndarray | None = None  # P(x) carried along for curve defaults

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        self.prior = np.asarray(self.prior, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float)
        self.utilities = np.asarray(self.utilities, dtype=float)
        if self.utilities.shape != (len(self.stimuli), len(self.prior)):
            raise DimensionMismatch(
                f"utilities shape {self.utilities.shape}, expected "
                f"({len(self.stimuli)}, {len(self.prior)})"
            )
        if len(self.betas) != len(self.durations):
            raise DimensionMismatch(
                f"{len(self.betas)} betas for {len(self.durations)} durations"
            )
        if np.any(self.betas < 0):
            raise ConfigError("betas must be nonnegative")
        if self.stimulus_marginal is not None:
            self.stimulus_marginal = np.asarray(self.stimulus_marginal, dtype=float)

    @property
    def n_choices(self) -> int:
        return len(self.prior)

    @property
    def anchor_index(self) -> int:
        try:
            return self.durations.index(float(self.gauge.anchor_duration))
        except ValueError:
            raise GaugeError(
                f"anchor duration {self.gauge.anchor_duration} not in {self.durations}"
            ) from None

    def x_index(self, stimulus: int) -> int:
        try:
            return self.stimuli.index(stimulus)
        except ValueError:
            raise ConfigError(f"stimulus {stimulus} not in model grid {self.stimuli}") from None

    def conditionals(self) -> np.ndarray:
        """Model posteriors Q(y|x,r) on the full grid, shape (X, R, Y)."""
        return _conditionals(self.kind, self.prior, self.betas, self.utilities)

    def copy(self) -> "DecompositionModel":
        return replace(
            self,
            stimuli=list(self.stimuli),
            durations=list(self.durations),
            prior=self.prior.copy(),
            betas=self.betas.copy(),
            utilities=self.utilities.copy(),
            stimulus_marginal=None if self.stimulus_marginal is None
            else self.stimulus_marginal.copy(),
        )


def _conditionals(kind: str, prior: np.ndarray, betas: np.ndarray, utilities: np.ndarray) -> np.ndarray:
    logits = betas[None, :, None] * utilities[:, None, :]        # (X, R, Y)
    shifted = np.exp(logits - logits.max(axis=2, keepdims=True))
    if kind == "gibbs":
        weights = prior[None, None, :] * shifted
    else:
        weights = shifted
    return weights / weights.sum(axis=2, keepdims=True)


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings; defaults suit the 5x3x8 experiment grid.

    The defaults were tuned on synthetic recovery problems: eta0 = 1.0
    sits well inside the stability region for smoothed tables, and the
    slow schedule (large tau) lets the weakly-curved utility directions
    converge instead of freezing early.
    """

    max_iterations: int = 100_000
    tolerance: float = 1e-11      # stop when |delta J| per iteration < this, in bits
    eta0: float = 1.0
    tau: float = 1e5
    seed: int = 0
    beta_floor: float = 1e-8

    def __post_init__(self):
        if self.eta0 <= 0 or self.tau <= 0 or self.tolerance <= 0:
            raise ConfigError("eta0, tau and tolerance must all be positive")

    def learning_rate(self, t: int) -> float:
        return self.eta0 / (1.0 + t / self.tau)


@dataclass
class FitReport:
    final_j_bits: float
    iterations_used: int
    converged: bool
    j_trace: list[float] = field(default_factory=list)  # J in bits, one entry per iteration


def _check_grids(table: EmpiricalTable, model: DecompositionModel) -> None:
    if list(table.stimuli) != list(model.stimuli) or list(table.durations) != list(model.durations):
        raise DimensionMismatch(
            f"table grid ({table.stimuli}, {table.durations}) does not match "
            f"model grid ({model.stimuli}, {model.durations})"
        )
    if table.n_choices != model.n_choices:
        raise DimensionMismatch(
            f"table has {table.n_choices} choices, model has {model.n_choices}"
        )


def average_kl_nats(table: EmpiricalTable, model: DecompositionModel) -> float:
    """sum_{x,r} P(x,r) KL(P(.|x,r) || Q(.|x,r)) in nats."""
    _check_grids(table, model)
    p = table.conditionals
    q = model.conditionals()
    support = p > PROB_FLOOR
    if np.any(support & (q <= PROB_FLOOR)):
        return float("inf")
    ratio = np.ones_like(p)
    np.divide(p, q, out=ratio, where=support)
    cell_kl = np.sum(np.where(support, p * np.log(ratio), 0.0), axis=2)
    return float(np.sum(table.p_xr * cell_kl))


def average_kl_bits(table: EmpiricalTable, model: DecompositionModel) -> float:
    """The fit objective: average KL divergence reported in bits."""
    return average_kl_nats(table, model) / LN2


def kl_grad_betas(table: EmpiricalTable, model: DecompositionModel) -> np.ndarray:
    """d(average KL in nats)/d beta(r):  sum_x P(x,r) sum_y [Q - P] U_x(y)."""
    _check_grids(table, model)
    gap = model.conditionals() - table.conditionals          # (X, R, Y)
    weighted = table.p_xr[:, :, None] * gap
    return np.einsum("xry,xy->r", weighted, model.utilities)


def kl_grad_utilities(table: EmpiricalTable, model: DecompositionModel) -> np.ndarray:
    """d(average KL in nats)/d U_x(y):  sum_r P(x,r) beta(r) [Q - P]."""
    _check_grids(table, model)
    gap = model.conditionals() - table.conditionals
    return np.einsum("xr,r,xry->xy", table.p_xr, model.betas, gap)


def project_gauge(model: DecompositionModel, *, beta_floor: float = 1e-8) -> DecompositionModel:
    """Return the gauge-fixed equivalent of ``model``; Q is unchanged.

    Rescales betas by beta0/beta(r0) and utilities by beta(r0)/beta0
    (every product beta(r) U_x(y) is preserved), then shifts each U_x
    so its certainty-equivalent at the anchor is zero: for the gibbs
    kind the shift is (1/beta0) log sum_y P(y) exp(beta0 U_x(y)); the
    softmax kind drops the prior weighting.
    """
    out = model.copy()
    i0 = out.anchor_index
    anchor_beta = float(out.betas[i0])
    if anchor_beta <= beta_floor:
        raise GaugeError(
            f"beta at the anchor duration is {anchor_beta:g} <= floor {beta_floor:g}; "
            "gauge is degenerate"
        )
    beta0 = out.gauge.beta0
    scale = anchor_beta / beta0
    out.betas = out.betas / scale
    out.betas[i0] = beta0  # exact, not through the division round-off
    out.utilities = out.utilities * scale

    logits = beta0 * out.utilities                            # (X, Y)
    shift = logits.max(axis=1, keepdims=True)
    if out.kind == "gibbs":
        weighted = out.prior[None, :] * np.exp(logits - shift)
    else:
        weighted = np.exp(logits - shift)
    ce = (shift[:, 0] + np.log(weighted.sum(axis=1))) / beta0  # (X,)
    out.utilities = out.utilities - ce[:, None]
    return out


def initialize_model(
    table: EmpiricalTable,
    *,
    kind: str = "gibbs",
    gauge: GaugeSpec | None = None,
    seed: int = 0,
) -> DecompositionModel:
    """Warm-started, gauge-projected model from a table.

    Prior comes from the table; betas start at beta0; utilities start
    at log(P(y|x, r_max) / P(y)) / beta0, the exact inverse of the
    gibbs form at the longest duration.  Deterministic regardless of
    ``seed`` (the seed is threaded through for manifest bookkeeping).
    """
    del seed
    if gauge is None:
        gauge = GaugeSpec(anchor_duration=min(table.durations))
    prior = table.prior()
    r_max = int(np.argmax(table.durations))
    cond = np.clip(table.conditionals[:, r_max, :], PROB_FLOOR, None)
    if kind == "gibbs":
        utilities = np.log(cond / np.clip(prior, PROB_FLOOR, None)[None, :]) / gauge.beta0
    else:
        utilities = np.log(cond) / gauge.beta0
    model = DecompositionModel(
        kind=kind,
        stimuli=list(table.stimuli),
        durations=list(table.durations),
        prior=prior,
        betas=np.full(len(table.durations), gauge.beta0, dtype=float),
        utilities=utilities,
        gauge=gauge,
        stimulus_marginal=table.stimulus_marginal(),
    )
    return project_gauge(model)


def fit(
    table: EmpiricalTable,
    config: FitConfig | None = None,
    *,
    kind: str = "gibbs",
    gauge: GaugeSpec | None = None,
) -> tuple[DecompositionModel, FitReport]:
    """Alternate gradient steps and gauge projection until J stalls.

    Stops when the per-iteration change of J (in bits) drops below
    ``config.tolerance`` or ``config.max_iterations`` is reached.
    Betas are clipped at ``config.beta_floor`` from below after every
    step.  Raises :class:`DivergenceError` if J turns non-finite.

    The loop body is a fused re-statement of kl_grad_betas,
    kl_grad_utilities, project_gauge and average_kl_nats that computes
    the model conditionals once per iteration; the standalone
    functions remain the reference implementations and the tests hold
    the two forms together.
    """
    if config is None:
        config = FitConfig()
    model = initialize_model(table, kind=kind, gauge=gauge, seed=config.seed)
    i0 = model.anchor_index
    beta0 = model.gauge.beta0
    prior = model.prior
    betas = model.betas.copy()
    utilities = model.utilities.copy()

    p_xr = table.p_xr
    cond = table.conditionals
    support = cond > PROB_FLOOR
    weighted_cond = p_xr[:, :, None] * cond                          # (X, R, Y)
    safe_cond = np.where(support, cond, 1.0)
    entropy_term = float(np.sum(weighted_cond * np.log(safe_cond)))  # sum W ln P
    log_prior = np.log(np.clip(prior, PROB_FLOOR, None)) if kind == "gibbs" else None

    def posterior_and_objective(b: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, float]:
        logits = b[None, :, None] * u[:, None, :]
        if log_prior is not None:
            logits = logits + log_prior[None, None, :]
        shift = logits.max(axis=2, keepdims=True)
        w = np.exp(logits - shift)
        z = w.sum(axis=2, keepdims=True)
        q = w / z
        log_q = (logits - shift) - np.log(z)
        j = entropy_term - float(np.sum(weighted_cond * log_q))
        return q, j

    q, j_prev = posterior_and_objective(betas, utilities)
    if not np.isfinite(j_prev):
        raise DivergenceError("objective is non-finite at initialization")
    trace: list[float] = []
    converged = False
    iterations = 0
    for t in range(config.max_iterations):
        gap = (q - cond) * p_xr[:, :, None]
        grad_b = np.einsum("xry,xy->r", gap, utilities)
        grad_u = np.einsum("r,xry->xy", betas, gap)
        eta = config.learning_rate(t)
        betas -= eta * grad_b
        utilities -= eta * grad_u
        np.clip(betas, config.beta_floor, None, out=betas)

        anchor_beta = betas[i0]
        if anchor_beta <= config.beta_floor:
            raise GaugeError(
                f"beta at the anchor duration hit the floor at iteration {t}; gauge is degenerate"
            )
        scale = anchor_beta / beta0
        betas /= scale
        betas[i0] = beta0
        utilities *= scale
        logits0 = beta0 * utilities
        if log_prior is not None:
            logits0 = logits0 + log_prior[None, :]
        shift0 = logits0.max(axis=1, keepdims=True)
        ce = (shift0[:, 0] + np.log(np.exp(logits0 - shift0).sum(axis=1))) / beta0
        utilities -= ce[:, None]

        q, j = posterior_and_objective(betas, utilities)
        if not np.isfinite(j):
            raise DivergenceError(f"objective became non-finite at iteration {t}")
        trace.append(j / LN2)
        iterations = t + 1
        if abs(j_prev - j) / LN2 < config.tolerance:
            converged = True
            j_prev = j
            break
        j_prev = j

    model.betas = betas
    model.utilities = utilities
    report = FitReport(
        final_j_bits=j_prev / LN2,
        iterations_used=iterations,
        converged=converged,
        j_trace=trace,
    )
    return model, report


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def model_to_dict(model: DecompositionModel, report: FitReport | None = None) -> dict:
    doc = {
        "kind": "decomposition-model",
        "schema_version": MODEL_SCHEMA_VERSION,
        "model_kind": model.kind,
        "stimuli": list(model.stimuli),
        "durations": [float(d) for d in model.durations],
        "prior": model.prior.tolist(),
        "betas": model.betas.tolist(),
        "utilities": model.utilities.tolist(),
        "gauge": {
            "anchor_duration": float(model.gauge.anchor_duration),
            "beta0": float(model.gauge.beta0),
        },
        "stimulus_marginal": None if model.stimulus_marginal is None
        else model.stimulus_marginal.tolist(),
    }
    if report is not None:
        doc["report"] = {
            "final_j_bits": report.final_j_bits,
            "iterations_used": report.iterations_used,
            "converged": report.converged,
            "j_trace": list(report.j_trace),
        }
    return doc


def model_from_dict(data: dict) -> tuple[DecompositionModel, FitReport | None]:
    if data.get("kind") != "decomposition-model":
        raise ConfigError("not a decomposition-model document")
    if data.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema_version {data.get('schema_version')!r}")
    model = DecompositionModel(
        kind=data["model_kind"],
        stimuli=[int(x) for x in data["stimuli"]],
        durations=[float(r) for r in data["durations"]],
        prior=np.asarray(data["prior"], dtype=float),
        betas=np.asarray(data["betas"], dtype=float),
        utilities=np.asarray(data["utilities"], dtype=float),
        gauge=GaugeSpec(
            anchor_duration=float(data["gauge"]["anchor_duration"]),
            beta0=float(data["gauge"]["beta0"]),
        ),
        stimulus_marginal=None if data.get("stimulus_marginal") is None
        else np.asarray(data["stimulus_marginal"], dtype=float),
    )
    report = None
    if data.get("report") is not None:
        r = data["report"]
        report = FitReport(
            final_j_bits=float(r["final_j_bits"]),
            iterations_used=int(r["iterations_used"]),
            converged=bool(r["converged"]),
            j_trace=[float(v) for v in r["j_trace"]],
        )
    return model, report


def save_model(path: str | Path, model: DecompositionModel, report: FitReport | None = None) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model, report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path) -> tuple[DecompositionModel, FitReport | None]:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
