"""Bounded-rational choice toolkit.

Fits the Gibbs-posterior choice model (prior over choices, duration-
dependent inverse temperatures, stimulus-dependent utilities) to timed
2-SAT puzzle trial data, evaluates and extrapolates performance
measures, simulates synthetic agents for verification, and collects
real trial data over HTTP.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
