"""Regularized approximation for sublinear exponents.

For p < 1 or q < 1 the reactions (v + 1/n)^p and (u + 1/n)^q are solved for
an increasing schedule of n. The solutions decrease in n; the last level
is the estimate of the maximal positive solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .core import FreeFrontError, InitialData, ProblemSpec, Trajectory, validate_spec
from .ordering import OrderingReport, OrderingViolation, compare_trajectories
from .solver import SolverConfig, shift_floor, simulate, simulate_coupled

__all__ = ["CascadeResult", "NoConvergence", "OrderingViolation", "run_cascade", "shift_floor"]

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1, 2, 4, 8, 16)


class NoConvergence(FreeFrontError):
    def __init__(self, result: CascadeResult):
        last = result.differences[-1] if result.differences else float("nan")
        super().__init__(
            f"schedule {list(result.levels)} exhausted; last level difference "
            f"{last:.3e} >= tol {result.tol:.3e}"
        )
        self.result = result


@dataclass
class CascadeResult:
    levels: dict[int, Trajectory]
    tol: float
    ordering: list[OrderingReport] = field(default_factory=list)
    differences: list[float] = field(default_factory=list)
    converged: bool = False
    lipschitz: bool = False

    @property
    def limit(self) -> Trajectory:
        return self.levels[max(self.levels)]

    def differences_non_increasing(self) -> bool:
        d = self.differences
        return all(b <= a for a, b in zip(d, d[1:]))


def run_cascade(
    spec: ProblemSpec,
    data: InitialData,
    config: SolverConfig,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    tol: float = 1e-4,
    ordering_rtol: float = 1e-6,
) -> CascadeResult:
    """Solve the shifted problems with shifts (1/n, 1/n) on one shared step
    sequence and check that each level lies below the previous one.

    Raises :class:`OrderingViolation` when a level exceeds its predecessor by
    more than ``ordering_rtol * sup`` and :class:`NoConvergence` (carrying the
    full result) when the last two levels still differ by ``tol`` or more.
    """
    if spec.lipschitz:
        log.warning("Lipschitz regime (p, q >= 1): single run without shifts")
        traj = simulate(spec, data, config)
        return CascadeResult({0: traj}, tol, converged=True, lipschitz=True)
    schedule = [int(n) for n in schedule]
    if not schedule or any(n < 1 for n in schedule) or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError(f"schedule must be strictly increasing positive integers, got {schedule}")

    problem = validate_spec(spec, data, config.N)
    runs = [(problem, (1.0 / n, 1.0 / n)) for n in schedule]
    trajectories = simulate_coupled(runs, config)
    result = CascadeResult(dict(zip(schedule, trajectories)), tol)

    for (n_prev, prev), (n_next, nxt) in zip(result.levels.items(), list(result.levels.items())[1:]):
        report = compare_trajectories(nxt, prev, rtol=ordering_rtol)
        result.ordering.append(report)
        result.differences.append(report.max_gap)
        if not report.holds:
            raise OrderingViolation(report, f"level n={n_next} above n={n_prev}")
    result.converged = bool(result.differences) and result.differences[-1] < tol
    if not result.converged:
        raise NoConvergence(result)
    return result
