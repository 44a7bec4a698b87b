"""Semantic exception hierarchy shared across the toolkit."""


class BoundedChoiceError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(BoundedChoiceError, ValueError):
    """Arrays that must share a length or grid do not."""


class InvalidDistribution(BoundedChoiceError, ValueError):
    """A probability vector violates nonnegativity or normalization."""


class DomainError(BoundedChoiceError, ValueError):
    """An operation was called outside its mathematical domain
    (e.g. a zero prior entry where a ratio to the prior is needed)."""


class GaugeError(BoundedChoiceError, ValueError):
    """Gauge fixing is impossible or degenerate (beta at the anchor is
    zero or below the configured floor)."""


class DivergenceError(BoundedChoiceError, RuntimeError):
    """The fit produced a non-finite objective value."""


class TrialFormatError(BoundedChoiceError, ValueError):
    """One or more lines of a trial file failed to parse or validate.

    Carries the full list of per-line problems so callers can report
    them all at once.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__(
            "invalid trial file (%d problem%s):\n%s"
            % (len(problems), "" if len(problems) == 1 else "s", "\n".join(problems))
        )


class ConfigError(BoundedChoiceError, ValueError):
    """A run configuration is inconsistent (missing solution entry,
    bad grid, unknown stimulus, ...)."""
