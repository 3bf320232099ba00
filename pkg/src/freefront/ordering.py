"""Pointwise ordering of two runs compared in physical space.

Profiles are compared on the lower run's domain [0, s_lower(t)], with the
upper run's profile interpolated linearly in x. Violations smaller than
``rtol * sup`` are counted as discretization noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FixedDomainState, FreeFrontError, Trajectory


class OrderingViolation(FreeFrontError):
    def __init__(self, report: OrderingReport, label: str = ""):
        w = report.worst
        super().__init__(
            f"{label + ': ' if label else ''}ordering violated at t = {w['t']:.6g}, "
            f"component {w['component']}, node {w['node']}, x = {w['x']:.6g}, "
            f"magnitude {-w['margin']:.3e} (tolerance {w['tol']:.3e})"
        )
        self.report = report


@dataclass
class OrderingReport:
    holds: bool = True
    rtol: float = 1e-6
    checks: int = 0
    noise_events: int = 0
    min_margin: float = np.inf
    max_gap: float = 0.0
    worst: dict = field(default_factory=lambda: {
        "t": np.nan, "component": None, "node": None, "x": np.nan, "margin": np.inf, "tol": 0.0, "scaled": np.inf,
    })
    notes: list[str] = field(default_factory=list)

    def _update(self, t, component, node, x, margin, tol):
        self.checks += 1
        self.min_margin = min(self.min_margin, margin)
        self.max_gap = max(self.max_gap, abs(margin))
        scaled = margin / max(tol, 1e-300)
        if margin < 0:
            if margin >= -tol:
                self.noise_events += 1
            else:
                self.holds = False
        if scaled < self.worst["scaled"]:
            self.worst = {"t": t, "component": component, "node": node, "x": x,
                          "margin": margin, "tol": tol, "scaled": scaled}

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "rtol": self.rtol,
            "checks": self.checks,
            "noise_events": self.noise_events,
            "min_margin": float(self.min_margin),
            "max_gap": float(self.max_gap),
            "worst": {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.worst.items()},
            "notes": list(self.notes),
        }


def _compare_states(lower: FixedDomainState, upper: FixedDomainState, report: OrderingReport) -> None:
    sup = max(lower.sup(), upper.sup())
    tol = report.rtol * sup
    x_low = np.linspace(0.0, 1.0, lower.n + 1) * lower.s
    x_up = np.linspace(0.0, 1.0, upper.n + 1) * upper.s
    for name, lo, up in (("u", lower.w, upper.w), ("v", lower.z, upper.z)):
        if lower.s == upper.s and lower.n == upper.n:
            up_at = up
        else:
            up_at = np.interp(x_low, x_up, up, right=0.0)
        margin = up_at - lo
        k = int(np.argmin(margin))
        report._update(lower.t, name, k, float(x_low[k]), float(margin[k]), tol)
        report.max_gap = max(report.max_gap, float(np.abs(margin).max()))


def compare_trajectories(a: Trajectory, b: Trajectory, rtol: float = 1e-6,
                         direction: str = "le") -> OrderingReport:
    """Check a <= b (``direction="le"``) or a >= b (``"ge"``) on every shared
    time level: fronts at every recorded step, profiles at every snapshot."""
    if direction not in ("le", "ge"):
        raise ValueError("direction must be 'le' or 'ge'")
    lower, upper = (a, b) if direction == "le" else (b, a)
    report = OrderingReport(rtol=rtol)

    n = min(len(lower.times), len(upper.times))
    t_lo = np.asarray(lower.times[:n])
    t_up = np.asarray(upper.times[:n])
    shared = t_lo == t_up
    if not shared.all():
        report.notes.append(f"time levels diverge after index {int(np.argmin(shared))}")
        n = int(np.argmin(shared))
    for k in range(n):
        s_lo, s_up = lower.fronts[k], upper.fronts[k]
        # fronts are lengths; the band scales with the front itself
        report._update(lower.times[k], "s", None, float(s_lo), s_up - s_lo, rtol * max(s_up, s_lo))

    snaps_up = {s.t: s for s in upper.snapshots}
    for snap in lower.snapshots:
        other = snaps_up.get(snap.t)
        if other is not None:
            _compare_states(snap, other, report)
    return report
