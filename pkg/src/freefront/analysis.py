"""Certificates and diagnostics over finished trajectories.

* small-data global existence via an explicit super-solution barrier,
* empirical blow-up detection with a heuristic T_max extrapolation,
* the a-priori front-speed bound for bounded solutions,
* long-time decay diagnostics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import FreeFrontError, ProblemSpec, RunVerdict, Trajectory
from .transform import OutOfDomain

log = logging.getLogger(__name__)

DOMINATION_ATOL = 1e-8
EPS_RTOL = 1e-6


class WrongRegime(FreeFrontError, ValueError):
    pass


class InvalidBound(FreeFrontError, ValueError):
    pass


class TooShort(FreeFrontError, ValueError):
    pass


# -- small-data certificate ---------------------------------------------------

def eps_cap(spec: ProblemSpec) -> float:
    """Strict upper bound d / (8 mu (1 + rho)) on both amplitudes."""
    return spec.d / (8.0 * spec.mu * (1.0 + spec.rho))


@dataclass(frozen=True)
class SmallDataCheck:
    feasible: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.feasible


def check_small_data(spec: ProblemSpec, eps1: float, eps2: float) -> SmallDataCheck:
    if spec.pq <= 1:
        raise WrongRegime(f"small-data certificate needs pq > 1, got pq = {spec.pq:g}")
    if not (eps1 > 0 and eps2 > 0):
        raise ValueError("eps1 and eps2 must be > 0")
    d, s0 = spec.d, spec.s0
    first = eps1 * d - 16.0 * s0**2 * eps2**spec.p
    second = eps2 * d - 16.0 * s0**2 * eps1**spec.q
    cap = eps_cap(spec)
    if first < 0:
        return SmallDataCheck(False, f"eps1*d - 16 s0^2 eps2^p = {first:.6g} < 0")
    if second < 0:
        return SmallDataCheck(False, f"eps2*d - 16 s0^2 eps1^q = {second:.6g} < 0")
    if not eps1 < cap:
        return SmallDataCheck(False, f"eps1 = {eps1:.6g} not below d/(8 mu (1+rho)) = {cap:.6g}")
    if not eps2 < cap:
        return SmallDataCheck(False, f"eps2 = {eps2:.6g} not below d/(8 mu (1+rho)) = {cap:.6g}")
    return SmallDataCheck(True)


def find_eps(spec: ProblemSpec, rtol: float = EPS_RTOL) -> float | None:
    """Largest feasible symmetric amplitude eps1 = eps2 = eps, or None.

    Each power constraint is monotone in eps, so the symmetric feasible set is
    an interval; a log scan locates a feasible point and bisection refines its
    upper edge.
    """
    if spec.pq <= 1:
        raise WrongRegime(f"small-data certificate needs pq > 1, got pq = {spec.pq:g}")
    cap = eps_cap(spec)
    grid = cap * np.logspace(0, -15, 301)[1:]
    feasible = [e for e in grid if check_small_data(spec, e, e)]
    if not feasible:
        reason = check_small_data(spec, grid[-1], grid[-1]).reason
        log.warning("no feasible symmetric eps: %s", reason)
        return None
    lo = float(max(feasible))
    above = grid[grid > lo]
    hi = float(above.min()) if above.size else cap
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if check_small_data(spec, mid, mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class SuperSolution:
    """Barrier s(t) = 2 s0 (2 - e^{-a t}), u = eps1 e^{-b t} (1 - (x/s)^2),
    v = eps2 e^{-gamma t} (1 - (x/s)^2) with a = b = gamma p = d / (16 s0^2)."""

    spec: ProblemSpec
    eps1: float
    eps2: float

    @property
    def s0(self) -> float:
        return self.spec.s0

    @property
    def b(self) -> float:
        return self.spec.d / (16.0 * self.spec.s0**2)

    @property
    def a(self) -> float:
        return self.b

    @property
    def gamma(self) -> float:
        return self.b / self.spec.p

    def front(self, t):
        return 2.0 * self.s0 * (2.0 - np.exp(-self.a * t))

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise OutOfDomain("t must be >= 0")
        s = self.front(t)
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0) or np.any(xa > s * (1 + 1e-15)):
            raise OutOfDomain("x must lie in [0, s(t)]")
        shape = 1.0 - (xa / s) ** 2
        return s, self.eps1 * np.exp(-self.b * t) * shape, self.eps2 * np.exp(-self.gamma * t) * shape

    def residuals(self, t, x):
        """Closed-form u_t - d1 u_xx - v^p, v_t - d2 v_xx - u^q and the Stefan
        excess s' + mu (u_x + rho v_x) at x = s(t)."""
        sp = self.spec
        s = self.front(t)
        ds = 2.0 * self.s0 * self.a * np.exp(-self.a * t)
        r = x / s
        shape = 1.0 - r**2
        eu = self.eps1 * np.exp(-self.b * t)
        ev = self.eps2 * np.exp(-self.gamma * t)
        # d/dt (1 - x^2/s^2) = 2 x^2 s'/s^3
        shape_t = 2.0 * r**2 * ds / s
        shape_xx = -2.0 / s**2
        ru = -self.b * eu * shape + eu * shape_t - sp.d1 * eu * shape_xx - (ev * shape) ** sp.p
        rv = -self.gamma * ev * shape + ev * shape_t - sp.d2 * ev * shape_xx - (eu * shape) ** sp.q
        stefan = ds + sp.mu * (-2.0 * eu / s - sp.rho * 2.0 * ev / s)
        return ru, rv, stefan


def eval_supersolution(ss: SuperSolution, t, x):
    return ss(t, x)


def _domination(traj: Trajectory, ss: SuperSolution, atol: float) -> tuple[bool, float, dict]:
    t = np.asarray(traj.times)
    front_margin = ss.front(t) - np.asarray(traj.fronts)
    sup_margin = np.minimum(
        ss.eps1 * np.exp(-ss.b * t) - np.asarray(traj.sup_u),
        ss.eps2 * np.exp(-ss.gamma * t) - np.asarray(traj.sup_v),
    )
    worst = {"front": float(front_margin.min()), "sup": float(sup_margin.min()), "profile": math.inf}
    ok = bool(np.all(front_margin > 0) and np.all(sup_margin >= -atol))
    for snap in traj.snapshots:
        x = np.linspace(0.0, 1.0, snap.n + 1) * snap.s
        if snap.s >= ss.front(snap.t):
            ok = False
            continue
        _, ub, vb = ss(snap.t, x)
        m = float(min((ub - snap.w).min(), (vb - snap.z).min()))
        worst["profile"] = min(worst["profile"], m)
        ok = ok and m >= -atol
    margin = min(worst["sup"], worst["profile"])
    return ok, margin, worst


def certify_global(trajectory: Trajectory, spec: ProblemSpec | None = None,
                   atol: float = DOMINATION_ATOL, threshold: float = 1e8) -> RunVerdict:
    spec = spec or trajectory.spec
    blow = detect_blowup(trajectory, threshold) if len(trajectory.times) >= 3 else None
    if spec.pq <= 1:
        if blow is not None:
            return RunVerdict("BlowUp", blow.as_dict() | {"note": "blow-up trigger with pq <= 1"})
        return RunVerdict("GlobalHeuristic", {"pq": spec.pq, "horizon": trajectory.times[-1],
                                              "status": trajectory.status})
    if blow is not None:
        return RunVerdict("BlowUp", blow.as_dict())
    eps = find_eps(spec)
    if eps is None:
        return RunVerdict("Undecided", {"reason": "no feasible symmetric eps"})
    evidence = {"eps1": eps, "eps2": eps, "horizon": trajectory.times[-1], "status": trajectory.status}
    u0, v0 = trajectory.sup_u[0], trajectory.sup_v[0]
    if u0 > eps / 2 or v0 > eps / 2:
        evidence["reason"] = f"initial sup-norms ({u0:.6g}, {v0:.6g}) exceed eps/2 = {eps / 2:.6g}"
        return RunVerdict("Undecided", evidence)
    ok, margin, worst = _domination(trajectory, SuperSolution(spec, eps, eps), atol)
    evidence["margin"] = margin
    evidence["worst"] = worst
    if not ok:
        evidence["reason"] = "numerical solution not dominated by the barrier"
        return RunVerdict("Undecided", evidence)
    return RunVerdict("GlobalCertified", evidence)


# -- blow-up ------------------------------------------------------------------

@dataclass(frozen=True)
class BlowUpEvidence:
    t_cross: float
    trigger: str
    threshold: float
    t_max_estimate: float | None = None
    fit_residual: float | None = None

    def as_dict(self) -> dict:
        return {
            "t_cross": self.t_cross,
            "trigger": self.trigger,
            "threshold": self.threshold,
            "t_max_estimate": self.t_max_estimate,
            "fit_residual": self.fit_residual,
        }


def estimate_t_max(times, sup, pq: float, window: int = 10) -> tuple[float | None, float | None]:
    """Fit 1/sup^(pq-1) linearly in t over the last ``window`` samples and
    return the zero crossing with the rms residual; the estimate is dropped
    when the residual exceeds 10% of the fitted quantity's range."""
    if pq <= 1:
        return None, None
    t = np.asarray(times[-window:], dtype=float)
    y = 1.0 / np.asarray(sup[-window:], dtype=float) ** (pq - 1.0)
    if len(t) < 3 or not np.all(np.isfinite(y)):
        return None, None
    slope, intercept = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t + intercept)) ** 2)))
    span = float(y.max() - y.min())
    if slope >= 0 or span == 0 or resid > 0.1 * span:
        return None, resid
    return float(-intercept / slope), resid


def detect_blowup(trajectory: Trajectory, threshold: float = 1e8) -> BlowUpEvidence | None:
    if len(trajectory.times) < 3:
        raise TooShort("need at least 3 samples")
    sup = np.maximum(trajectory.sup_u, trajectory.sup_v)
    hits = np.flatnonzero(sup >= threshold)
    if hits.size:
        k, trigger = int(hits[0]), "threshold"
    elif trajectory.blowup_trigger is not None:
        k, trigger = len(trajectory.times) - 1, trajectory.blowup_trigger
    else:
        return None
    est, resid = estimate_t_max(trajectory.times[: k + 1], trajectory.sup_u[: k + 1], trajectory.spec.pq)
    return BlowUpEvidence(float(trajectory.times[k]), trigger, threshold, est, resid)


# -- front-speed bound --------------------------------------------------------

def c1_norm(profile, s0: float) -> float:
    """max |f| + max |f'| on [0, s0] for uniform samples."""
    values = np.asarray(profile, dtype=float)
    h = s0 / (len(values) - 1)
    return float(np.abs(values).max() + np.abs(np.gradient(values, h, edge_order=2)).max())


def front_speed_bound(M: float, spec: ProblemSpec, u0_c1: float, v0_c1: float) -> float:
    """Upper bound on s'(t) for solutions with sup-norm at most M.

    Barrier slopes K, K~ come from the quadratic comparison profile
    M (2K (s - x) - K^2 (s - x)^2) near the front.
    """
    if not M > 0:
        raise InvalidBound(f"sup bound must be > 0, got {M!r}")
    if not (u0_c1 > 0 and v0_c1 > 0):
        raise InvalidBound("C1 norms of the initial data must be > 0")
    k_u = max(4.0 * u0_c1 / (3.0 * M), math.sqrt(M ** (spec.p - 1.0) / (2.0 * spec.d1)))
    k_v = max(4.0 * v0_c1 / (3.0 * M), math.sqrt(M ** (spec.q - 1.0) / (2.0 * spec.d2)))
    return spec.mu * (2.0 * M * k_u + spec.rho * 2.0 * M * k_v)


# -- decay --------------------------------------------------------------------

@dataclass
class DecayReport:
    s_inf_estimate: float
    front_speed_tail_max: float
    sup_u_tail: tuple[float, float]
    sup_v_tail: tuple[float, float]
    decay_rate: float
    fit_residual: float
    consistent: bool
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "s_inf_estimate": self.s_inf_estimate,
            "front_speed_tail_max": self.front_speed_tail_max,
            "sup_u_tail": list(self.sup_u_tail),
            "sup_v_tail": list(self.sup_v_tail),
            "decay_rate": self.decay_rate,
            "fit_residual": self.fit_residual,
            "decay_consistent": self.consistent,
            "notes": list(self.notes),
        }


def decay_diagnostic(trajectory: Trajectory, tail_fraction: float = 0.5,
                     speed_tol: float = 1e-4) -> DecayReport:
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    arr = trajectory.arrays()
    t = arr["t"]
    tail = t >= t[-1] * (1.0 - tail_fraction)
    if tail.sum() < 10:
        raise TooShort(f"only {int(tail.sum())} tail samples, need 10")
    su, sv, sp = arr["sup_u"][tail], arr["sup_v"][tail], arr["s_prime"][tail]
    tt = t[tail]

    notes = []
    positive = su > 0
    if positive.sum() >= 2:
        coef, res, *_ = np.polyfit(tt[positive], np.log(su[positive]), 1, full=True)
        rate = float(-coef[0])
        resid = float(math.sqrt(res[0] / positive.sum())) if len(res) else 0.0
    else:
        rate, resid = math.nan, math.nan
        notes.append("sup_u vanished on the tail")

    speed_max = float(np.abs(sp).max())
    monotone = bool(np.all(np.diff(su) <= 0) and su[-1] < su[0])
    consistent = trajectory.status == "completed" and speed_max < speed_tol and monotone
    if trajectory.status != "completed":
        notes.append(f"run status {trajectory.status}")
    if not monotone:
        notes.append("sup_u not decreasing over the tail")
    if speed_max >= speed_tol:
        notes.append(f"tail front speed {speed_max:.3e} >= {speed_tol:g}")
    return DecayReport(
        s_inf_estimate=float(arr["s"][-1]),
        front_speed_tail_max=speed_max,
        sup_u_tail=(float(su[0]), float(su[-1])),
        sup_v_tail=(float(sv[0]), float(sv[-1])),
        decay_rate=rate,
        fit_residual=resid,
        consistent=consistent,
        notes=notes,
    )
