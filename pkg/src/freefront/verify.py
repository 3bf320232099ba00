"""Comparison-principle harness and the cross-module property suite."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import analysis
from .cascade import NoConvergence, run_cascade
from .core import FreeFrontError, InitialData, ProblemSpec, Trajectory, validate_spec
from .ordering import OrderingReport, OrderingViolation, compare_trajectories
from .solver import MMSConfig, SolverConfig, run_mms, simulate, simulate_coupled

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-6
FRONT_RTOL = 1e-12
CLAMP_FRACTION = 1e-3
NEUMANN_NOTE = ("homogeneous Neumann at x = 0 meets both one-sided slope "
                "conditions weakly; runs admitted for either role")


class HypothesisViolation(FreeFrontError, ValueError):
    pass


@dataclass(frozen=True)
class RunInput:
    spec: ProblemSpec
    data: InitialData
    shifts: tuple[float, float] = (0.0, 0.0)


@dataclass
class PairResult:
    report: OrderingReport
    lower: Trajectory
    upper: Trajectory
    variant: str


def _check_hypotheses(lower: RunInput, upper: RunInput, n: int) -> str:
    keys = ("d1", "d2", "p", "q", "mu", "rho")
    lo_d, up_d = lower.spec.as_dict(), upper.spec.as_dict()
    for k in keys:
        if lo_d[k] != up_d[k]:
            raise HypothesisViolation(f"parameter {k} differs: {lo_d[k]} vs {up_d[k]}")
    (la, lb), (ua, ub) = lower.shifts, upper.shifts
    if la > ua or lb > ub:
        raise HypothesisViolation(f"shifts not ordered: {lower.shifts} vs {upper.shifts}")
    s_lo, s_up = lower.spec.s0, upper.spec.s0
    if s_lo > s_up:
        raise HypothesisViolation(f"initial fronts not ordered: {s_lo} > {s_up}")

    p_lo = validate_spec(lower.spec, lower.data, n)
    p_up = validate_spec(upper.spec, upper.data, n)
    x_lo = np.linspace(0.0, s_lo, n + 1)
    x_up = np.linspace(0.0, s_up, n + 1)
    for name, lo, up in (("u0", p_lo.u0, p_up.u0), ("v0", p_lo.v0, p_up.v0)):
        up_at = np.interp(x_lo, x_up, up)
        gap = up_at - lo
        band = 1e-12 * max(lo.max(), up.max())
        if gap.min() < -band:
            k = int(np.argmin(gap))
            raise HypothesisViolation(f"lower {name} exceeds upper at x = {x_lo[k]:.6g}")

    if s_lo < s_up:
        return "strict-front"
    if la < ua or lb < ub:
        return "strict-shift"
    return "weak"


def compare_ordered_runs(lower: RunInput, upper: RunInput, config: SolverConfig,
                         rtol: float = DEFAULT_RTOL, raise_on_violation: bool = True) -> PairResult:
    """Simulate both runs on a shared step sequence and check
    s_lower <= s_upper, u_lower <= u_upper, v_lower <= v_upper on [0, s_lower(t)]."""
    variant = _check_hypotheses(lower, upper, config.N)
    runs = [(validate_spec(r.spec, r.data, config.N), r.shifts) for r in (lower, upper)]
    lo, up = simulate_coupled(runs, config)
    report = compare_trajectories(lo, up, rtol=rtol)
    report.notes.append(f"variant: {variant}")
    report.notes.append(NEUMANN_NOTE)
    if raise_on_violation and not report.holds:
        raise OrderingViolation(report)
    return PairResult(report, lo, up, variant)


# -- run invariants ---------------------------------------------------------

def front_monotone(traj: Trajectory, positive_after: float = 0.01) -> tuple[bool, str]:
    s = np.asarray(traj.fronts)
    inc = np.diff(s)
    if inc.size and inc.min() < -FRONT_RTOL * s[:-1][np.argmin(inc)]:
        return False, f"front decreased by {-inc.min():.3e}"
    t = np.asarray(traj.times)
    sp = np.asarray(traj.front_speeds)
    late = t > positive_after
    if late.any() and sp[late].min() <= 0:
        return False, f"front speed {sp[late].min():.3e} not positive after t = {positive_after}"
    return True, ""


def positivity(traj: Trajectory) -> tuple[bool, str]:
    for snap in traj.snapshots:
        if snap.w.min() < 0 or snap.z.min() < 0:
            return False, f"negative stored value at t = {snap.t:.6g}"
    if traj.node_updates and traj.clamp_events > CLAMP_FRACTION * traj.node_updates:
        return False, f"{traj.clamp_events} clamps over {traj.node_updates} node updates"
    return True, ""


def speed_bound_holds(traj: Trajectory, slack: float = 0.05) -> tuple[bool, dict]:
    first = traj.snapshots[0]
    m = max(max(traj.sup_u), max(traj.sup_v))
    c = analysis.front_speed_bound(m, traj.spec, analysis.c1_norm(first.w, first.s),
                                   analysis.c1_norm(first.z, first.s))
    worst = max(traj.front_speeds)
    return bool(worst <= (1.0 + slack) * c), {"M": m, "bound": c, "max_speed": worst}


# -- property suite -----------------------------------------------------------

@dataclass
class Check:
    name: str
    status: str  # pass | fail | tolerance_sensitive
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


@dataclass
class SuiteReport:
    checks: list[Check] = field(default_factory=list)
    ordering_rtol: float = DEFAULT_RTOL

    @property
    def green(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    @property
    def exit_code(self) -> int:
        if any(c.status == "fail" for c in self.checks):
            return 3
        if any(c.status == "tolerance_sensitive" for c in self.checks):
            return 4
        return 0

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status != "pass"]

    def as_dict(self) -> dict:
        return {
            "ordering_rtol": self.ordering_rtol,
            "green": self.green,
            "exit_code": self.exit_code,
            "checks": [c.as_dict() for c in self.checks],
        }


def _ordering_status(lower: Trajectory, upper: Trajectory, rtol: float) -> tuple[str, dict]:
    report = compare_trajectories(lower, upper, rtol=rtol)
    if report.holds:
        return "pass", report.as_dict()
    if rtol < DEFAULT_RTOL and compare_trajectories(lower, upper, rtol=DEFAULT_RTOL).holds:
        return "tolerance_sensitive", report.as_dict()
    return "fail", report.as_dict()


SMALL = ProblemSpec(d1=1.0, d2=1.0, p=2.0, q=2.0, mu=1.0, rho=1.0, s0=1.0)


def _canonical_runs() -> dict[str, tuple[ProblemSpec, InitialData, SolverConfig]]:
    every = lambda dt, end: tuple(dt * k for k in range(1, int(round(end / dt))))  # noqa: E731
    return {
        "small_data": (SMALL, InitialData.family("parabola", 1.0 / 64),
                       SolverConfig(t_end=20.0, snapshot_times=every(0.5, 20.0))),
        "small_data_long": (SMALL, InitialData.family("parabola", 1.0 / 64),
                            SolverConfig(t_end=50.0, snapshot_times=every(1.0, 50.0))),
        "pq_one": (ProblemSpec(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0), InitialData.family("parabola", 10.0),
                   SolverConfig(t_end=10.0, snapshot_times=every(1.0, 10.0))),
        "blowup": (SMALL, InitialData.family("parabola", 50.0), SolverConfig(t_end=5.0)),
    }


def property_suite(ordering_rtol: float = DEFAULT_RTOL,
                   mms: MMSConfig | None = None) -> SuiteReport:
    """Run the canonical problem set and evaluate every invariant.

    Failures are collected; the suite never stops early.
    """
    suite = SuiteReport(ordering_rtol=ordering_rtol)

    def run(name: str, fn: Callable[[], tuple[str, dict] | tuple[bool, dict]]) -> None:
        try:
            status, detail = fn()
        except Exception as exc:  # noqa: BLE001 - one broken check must not stop the rest
            log.exception("check %s raised", name)
            suite.checks.append(Check(name, "fail", {"error": f"{type(exc).__name__}: {exc}"}))
            return
        if isinstance(status, bool):
            status = "pass" if status else "fail"
        suite.checks.append(Check(name, status, detail))

    trajs: dict[str, Trajectory] = {}
    for name, (spec, data, cfg) in _canonical_runs().items():
        try:
            trajs[name] = simulate(spec, data, cfg)
        except Exception as exc:  # noqa: BLE001
            suite.checks.append(Check(f"{name}.run", "fail", {"error": f"{type(exc).__name__}: {exc}"}))

    def needs(name):
        if name not in trajs:
            raise RuntimeError(f"run {name} unavailable")
        return trajs[name]

    for name in ("small_data", "small_data_long", "pq_one", "blowup"):
        run(f"{name}.front_monotone", lambda n=name: _flag(front_monotone(needs(n))))
        run(f"{name}.positivity", lambda n=name: _flag(positivity(needs(n))))

    def certified():
        v = analysis.certify_global(needs("small_data"))
        return v.kind == "GlobalCertified", {"kind": v.kind, **_jsonable(v.evidence)}

    def speed_bound():
        ok, detail = speed_bound_holds(needs("small_data"))
        return ok, detail

    def determinism():
        spec, data, cfg = _canonical_runs()["small_data"]
        again = simulate(spec, data, cfg)
        first = needs("small_data")
        same = (again.times == first.times and again.fronts == first.fronts
                and again.sup_u == first.sup_u and again.sup_v == first.sup_v
                and all(np.array_equal(a.w, b.w) and np.array_equal(a.z, b.z)
                        for a, b in zip(again.snapshots, first.snapshots)))
        return same, {}

    def decay():
        tr = needs("small_data_long")
        rep = analysis.decay_diagnostic(tr)
        ok = rep.consistent and tr.sup_u[-1] < 1e-3 and rep.front_speed_tail_max < 1e-4
        return ok, _jsonable(rep.as_dict())

    def pq_one():
        tr = needs("pq_one")
        v = analysis.certify_global(tr)
        return tr.status == "completed" and v.kind == "GlobalHeuristic", {"kind": v.kind, "status": tr.status}

    def blowup():
        tr = needs("blowup")
        v = analysis.certify_global(tr)
        ev = v.evidence
        return v.kind == "BlowUp" and ev["t_cross"] < 1.0, {"kind": v.kind, **_jsonable(ev)}

    def synthetic_tmax():
        t = np.linspace(0.8, 0.95, 10)
        sup = (1.0 - t) ** (-1.0 / 3.0)
        est, resid = analysis.estimate_t_max(t, sup, 4.0)
        return est is not None and abs(est - 1.0) <= 0.02, {"estimate": est, "residual": resid}

    def eps_value():
        eps = analysis.find_eps(SMALL)
        return eps is not None and abs(eps - 1 / 16) <= 1e-5 / 16, {"eps": eps}

    def bound_example():
        c = analysis.front_speed_bound(1.0, ProblemSpec(0.5, 0.5, 2, 2, 1, 1, 1), 0.75, 0.75)
        return c == 4.0, {"C": c}

    def mms_ladder():
        table = run_mms(ProblemSpec(1.0, 0.5, 2.0, 2.0, 1.0, 1.0, 1.0), SolverConfig(mms=mms or MMSConfig()))
        orders = table.column("order_u")
        err_s = table.column("err_s")
        v_orders = [math.log(a / b) / math.log(2) for a, b in zip(table.column("err_v"), table.column("err_v")[1:])]
        ok = (orders[-1] >= 1.8 and min(v_orders) >= 1.8
              and all(b < a for a, b in zip(err_s, err_s[1:])))
        return ok, {"rows": table.rows}

    def cascade():
        spec = ProblemSpec(1.0, 1.0, 0.5, 2.0, 1.0, 1.0, 1.0)
        cfg = SolverConfig(t_end=1.0, snapshot_times=tuple(0.1 * k for k in range(1, 10)))
        try:
            result = run_cascade(spec, InitialData.family("parabola", 1.0), cfg, schedule=(1, 2, 4, 8),
                                 ordering_rtol=DEFAULT_RTOL)
        except NoConvergence as exc:
            result = exc.result
        levels = list(result.levels.values())
        statuses = [_ordering_status(b, a, ordering_rtol)[0] for a, b in zip(levels, levels[1:])]
        level_ok = all(front_monotone(t)[0] and positivity(t)[0] for t in levels)
        status = "fail" if "fail" in statuses or not level_ok or not result.differences_non_increasing() \
            else ("tolerance_sensitive" if "tolerance_sensitive" in statuses else "pass")
        return status, {"differences": result.differences, "orderings": statuses, "levels_ok": level_ok}

    cfg_pair = SolverConfig(t_end=5.0, snapshot_times=tuple(0.25 * k for k in range(1, 20)))

    def doubled():
        pair = compare_ordered_runs(RunInput(SMALL, InitialData.family("parabola", 0.01)),
                                    RunInput(SMALL, InitialData.family("parabola", 0.02)),
                                    cfg_pair, raise_on_violation=False)
        return _ordering_status(pair.lower, pair.upper, ordering_rtol)

    def shifted():
        spec = ProblemSpec(1.0, 1.0, 0.5, 2.0, 1.0, 1.0, 1.0)
        data = InitialData.family("parabola", 1.0)
        cfg = SolverConfig(t_end=1.0, snapshot_times=tuple(0.1 * k for k in range(1, 10)))
        pair = compare_ordered_runs(RunInput(spec, data, (0.0, 0.0)), RunInput(spec, data, (0.1, 0.1)),
                                    cfg, raise_on_violation=False)
        return _ordering_status(pair.lower, pair.upper, ordering_rtol)

    def reflexive():
        run_in = RunInput(SMALL, InitialData.family("parabola", 0.01))
        pair = compare_ordered_runs(run_in, run_in, cfg_pair, raise_on_violation=False)
        rep = pair.report
        return rep.holds and rep.min_margin == 0.0 and rep.max_gap == 0.0, rep.as_dict()

    def swap_symmetry():
        spec = ProblemSpec(1.0, 0.5, 2.0, 1.5, 1.0, 2.0, 1.0)
        data = InitialData.family("parabola", 0.5, 0.25)
        cfg = SolverConfig(t_end=1.0)
        a = simulate(spec, data, cfg)
        b = simulate(spec.swapped(), data.swapped(), cfg)
        return _swap_close(a, b)

    run("certify.small_data", certified)
    run("speed_bound.small_data", speed_bound)
    run("determinism.small_data", determinism)
    run("decay.small_data_long", decay)
    run("global.pq_one", pq_one)
    run("blowup.large_data", blowup)
    run("blowup.synthetic_tmax", synthetic_tmax)
    run("certificate.find_eps", eps_value)
    run("speed_bound.example", bound_example)
    run("mms.ladder", mms_ladder)
    run("cascade.ordering", cascade)
    run("comparison.doubled", doubled)
    run("comparison.shifted", shifted)
    run("comparison.reflexive", reflexive)
    run("symmetry.swap", swap_symmetry)
    return suite


def _swap_close(a: Trajectory, b: Trajectory, rtol: float = 1e-10) -> tuple[bool, dict]:
    if len(a.times) != len(b.times):
        return False, {"reason": "different step counts"}
    fa, fb = np.asarray(a.fronts), np.asarray(b.fronts)
    front_err = float(np.max(np.abs(fa - fb) / fa))
    prof_err = 0.0
    for sa, sb in zip(a.snapshots, b.snapshots):
        scale = max(sa.sup(), 1e-300)
        prof_err = max(prof_err, float(np.abs(sa.w - sb.z).max() / scale), float(np.abs(sa.z - sb.w).max() / scale))
    return front_err <= rtol and prof_err <= rtol, {"front_rel_err": front_err, "profile_rel_err": prof_err}


def _flag(result: tuple[bool, str]) -> tuple[bool, dict]:
    ok, msg = result
    return ok, ({"reason": msg} if msg else {})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
