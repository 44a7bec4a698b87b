"""Gibbs-posterior machinery over finite choice sets.

A bounded-rational chooser with prior p, utility vector u and inverse
temperature beta >= 0 picks choices according to

    q(y) = p(y) * exp(beta * u(y)) / Z,

the maximizer of the free energy  E_q[u] - (1/beta) * KL(q || p).

Everything here is a pure function over 1-D numpy arrays.  All logs are
natural; conversion to bits happens only at reporting boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, GaugeError, InvalidDistribution

# Probabilities below this are treated as exact zeros inside KL sums,
# so 0 * log 0 never produces a NaN.
PROB_FLOOR = 1e-300

LN2 = float(np.log(2.0))


def as_distribution(probs, *, atol: float = 1e-9, name: str = "distribution") -> np.ndarray:
    """Validate and return a probability vector as a float64 array.

    Entries must be nonnegative and sum to 1 within ``atol``.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistribution(f"{name} must be a nonempty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidDistribution(f"{name} has non-finite entries")
    if np.any(p < 0):
        raise InvalidDistribution(f"{name} has negative entries (min {p.min():g})")
    total = float(p.sum())
    if abs(total - 1.0) > atol:
        raise InvalidDistribution(f"{name} sums to {total!r}, expected 1 within {atol:g}")
    return p


def as_utilities(values, *, name: str = "utilities") -> np.ndarray:
    """Validate and return a utility vector (finite reals) as float64."""
    u = np.asarray(values, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise InvalidDistribution(f"{name} must be a nonempty 1-D vector, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InvalidDistribution(f"{name} has non-finite entries")
    return u


@dataclass(frozen=True)
class GibbsContext:
    """A (prior, utility, beta) triple over one finite choice set.

    beta == 0 is permitted as a limit case: the posterior equals the
    prior, while certainty-equivalent and gauge operations reject it
    (use :func:`prior_expected_utility` for the beta -> 0 limit).
    """

    prior: np.ndarray
    utility: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "prior", as_distribution(self.prior, name="prior"))
        object.__setattr__(self, "utility", as_utilities(self.utility, name="utility"))
        object.__setattr__(self, "beta", float(self.beta))
        if len(self.prior) != len(self.utility):
            raise DimensionMismatch(
                f"prior has {len(self.prior)} entries but utility has {len(self.utility)}"
            )
        if not np.isfinite(self.beta) or self.beta < 0:
            raise DomainError(f"beta must be a finite nonnegative real, got {self.beta!r}")

    @property
    def n_choices(self) -> int:
        return len(self.prior)


def _shifted_weights(prior: np.ndarray, utility: np.ndarray, beta: float) -> np.ndarray:
    # exp is max-shifted so beta*u spans of ~700 stay finite.
    logits = beta * utility
    return prior * np.exp(logits - logits.max())


def gibbs_posterior(ctx: GibbsContext) -> np.ndarray:
    """Posterior q(y) = p(y) exp(beta u(y)) / Z.

    Zero-prior entries stay exactly zero; beta == 0 returns the prior
    itself (exactly, not through exp/normalize round-off).
    """
    if ctx.beta == 0.0:
        return ctx.prior.copy()
    w = _shifted_weights(ctx.prior, ctx.utility, ctx.beta)
    z = w.sum()
    if z <= 0.0:
        raise InvalidDistribution("all posterior weights vanished (zero prior mass everywhere)")
    return w / z


def bayes_posterior(prior, utility, beta: float) -> np.ndarray:
    """Posterior computed the long way round, through an explicit likelihood.

    Forms L(y) proportional to exp(beta u(y)) and applies Bayes' rule
    p(y) L(y) / sum_y' p(y') L(y').  Exists as an equivalence self-check
    against :func:`gibbs_posterior`; the two must agree within 1e-12.
    """
    ctx = GibbsContext(prior=prior, utility=utility, beta=beta)
    logits = ctx.beta * ctx.utility
    likelihood = np.exp(logits - logits.max())
    joint = ctx.prior * likelihood
    evidence = joint.sum()
    if evidence <= 0.0:
        raise InvalidDistribution("all posterior weights vanished (zero prior mass everywhere)")
    return joint / evidence


def kl_divergence(q: np.ndarray, p: np.ndarray) -> float:
    """KL(q || p) in nats; q-zeros contribute 0, q>0 on p==0 gives +inf."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f"shape mismatch {q.shape} vs {p.shape}")
    support = q > PROB_FLOOR
    if np.any(support & (p <= PROB_FLOOR)):
        return float("inf")
    qs = q[support]
    return float(np.sum(qs * np.log(qs / p[support])))


def free_energy(ctx: GibbsContext, q) -> float:
    """Free energy E_q[u] - (1/beta) KL(q || prior) of a candidate q.

    For beta == 0 the KL penalty is infinitely weighted: returns -inf
    unless q equals the prior exactly, in which case the expected
    utility under the prior is returned.
    """
    q = as_distribution(q, name="q")
    if len(q) != ctx.n_choices:
        raise DimensionMismatch(f"q has {len(q)} entries, context has {ctx.n_choices}")
    eu = float(np.dot(q, ctx.utility))
    kl = kl_divergence(q, ctx.prior)
    if ctx.beta == 0.0:
        return eu if np.array_equal(q, ctx.prior) else float("-inf")
    if kl == float("inf"):
        return float("-inf")
    return eu - kl / ctx.beta


def certainty_equivalent(ctx: GibbsContext) -> float:
    """Maximized free energy (1/beta) log sum_y p(y) exp(beta u(y)).

    Requires beta > 0.  The beta -> 0 limit is the prior expected
    utility; callers wanting that limit must use
    :func:`prior_expected_utility` explicitly.
    """
    if ctx.beta == 0.0:
        raise DomainError(
            "certainty_equivalent requires beta > 0; "
            "use prior_expected_utility for the beta -> 0 limit"
        )
    logits = ctx.beta * ctx.utility
    shift = logits.max()
    z = float(np.sum(ctx.prior * np.exp(logits - shift)))
    return (shift + np.log(z)) / ctx.beta


def prior_expected_utility(ctx: GibbsContext) -> float:
    """sum_y p(y) u(y): the documented beta -> 0 limit of the certainty-equivalent."""
    return float(np.dot(ctx.prior, ctx.utility))


def normalize_utilities(ctx: GibbsContext) -> np.ndarray:
    """Shift utilities so the certainty-equivalent becomes zero.

    Returns u'(y) = u(y) - CE(prior, u, beta).  Idempotent within
    1e-12; rejects beta == 0 (the shift is then undefined).
    """
    if ctx.beta == 0.0:
        raise GaugeError("cannot normalize utilities at beta == 0")
    return ctx.utility - certainty_equivalent(ctx)


def regret_residual(ctx: GibbsContext) -> np.ndarray:
    """Per-choice residual of the regret identity; zero for a correct implementation.

    log(q(y)/p(y)) + beta * (CE - u(y)) must vanish for every y, since
    the log-probability change of a choice is -beta times its regret.
    Exists as a built-in self-check: callers assert entries < 1e-10.
    """
    if ctx.beta <= 0.0:
        raise DomainError("regret_residual requires beta > 0")
    if np.any(ctx.prior <= 0.0):
        raise DomainError("regret_residual requires a strictly positive prior")
    post = gibbs_posterior(ctx)
    ce = certainty_equivalent(ctx)
    return np.log(post / ctx.prior) + ctx.beta * (ce - ctx.utility)
