"""Numerics laboratory for path-by-path uniqueness of Hilbert-space SDEs with
bounded measurable drift.

The subpackages mirror the ingredients of the uniqueness argument: spectral
Ornstein-Uhlenbeck simulation, approximation lattices, drift families, the
regularization functionals, Monte Carlo estimate checks, the log-type Gronwall
recursion and a Picard solver for the mild equation.
"""

__version__ = "0.1.0"

from regnoise.spectral import (
    OUPath,
    SpectralOperator,
    TimeGrid,
    semigroup_apply,
    simulate_ou,
    stationary_variance,
)
from regnoise.drift import DriftSpec, evaluate, twist, validate_assumption
from regnoise.gronwall import closed_form_cap, run_recursion

__all__ = [
    "OUPath",
    "SpectralOperator",
    "TimeGrid",
    "semigroup_apply",
    "simulate_ou",
    "stationary_variance",
    "DriftSpec",
    "evaluate",
    "twist",
    "validate_assumption",
    "closed_form_cap",
    "run_recursion",
]
