"""Finite-difference solver for a coupled semilinear parabolic system with a
Stefan-type free boundary in one space dimension."""

from .core import (
    FixedDomainState,
    InitialData,
    Problem,
    ProblemSpec,
    RunVerdict,
    Trajectory,
    make_initial_family,
    validate_spec,
)
from .solver import SolverConfig, MMSConfig, simulate, run_mms

__all__ = [
    "FixedDomainState",
    "InitialData",
    "MMSConfig",
    "Problem",
    "ProblemSpec",
    "RunVerdict",
    "SolverConfig",
    "Trajectory",
    "make_initial_family",
    "run_mms",
    "simulate",
    "validate_spec",
]
