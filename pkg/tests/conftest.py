import numpy as np
import pytest

from boundedchoice.puzzles import Clause, Formula, Literal


@pytest.fixture
def reference_formula() -> Formula:
    """(a|b)(a|~b)(b|c)(b|~c)(c|a)(c|~a): unique solution TTT (index 7)."""
    L = Literal
    return Formula(clauses=(
        Clause(L(0, True), L(1, True)),
        Clause(L(0, True), L(1, False)),
        Clause(L(1, True), L(2, True)),
        Clause(L(1, True), L(2, False)),
        Clause(L(2, True), L(0, True)),
        Clause(L(2, True), L(0, False)),
    ), id=0)


def random_context(rng: np.random.Generator, n: int = 8, beta_max: float = 5.0):
    """A random strictly-positive prior, utilities in [-2, 2], beta in (0, beta_max]."""
    prior = rng.dirichlet(np.full(n, 2.0))
    prior = np.clip(prior, 1e-6, None)
    prior = prior / prior.sum()
    utility = rng.uniform(-2.0, 2.0, n)
    beta = rng.uniform(1e-3, beta_max)
    return prior, utility, beta
