"""IMEX time integration of the front-fixed system coupled to the Stefan law.

One step: front speed from the old profiles, lagged front update, then
backward-Euler diffusion (tridiagonal, Neumann mirror at y = 0, Dirichlet at
y = 1) with explicit advection and reaction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import transform
from .core import (
    FixedDomainState,
    FreeFrontError,
    InitialData,
    Problem,
    ProblemSpec,
    Trajectory,
    validate_spec,
)

log = logging.getLogger(__name__)

CLAMP_RTOL = 1e-14
SPEED_EPS = 1e-12


class StepRejected(FreeFrontError):
    pass


class NonFiniteValue(FreeFrontError, ArithmeticError):
    pass


class StepCollapse(FreeFrontError):
    def __init__(self, dt: float, dt_min: float):
        super().__init__(f"time step {dt:.3e} fell below dt_min = {dt_min:.3e}")
        self.dt = dt
        self.dt_min = dt_min


class ConfigError(FreeFrontError, ValueError):
    pass


@dataclass(frozen=True)
class MMSConfig:
    """Manufactured-solution ladder: dt = dt_factor * dy^2 on each rung."""

    ladder: tuple[int, ...] = (32, 64, 128)
    dt_factor: float = 1.0
    t_end: float = 0.25


@dataclass(frozen=True)
class SolverConfig:
    N: int = 64
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    cfl_advection: float = 0.5
    cfl_reaction: float = 0.2
    t_end: float = 1.0
    blowup_threshold: float = 1e8
    snapshot_times: tuple[float, ...] = ()
    mms: MMSConfig | None = None
    # stiffness-only shift for sublinear exponents run without a shift
    stiffness_shift: float = 1.0 / 16

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))
        if not (isinstance(self.N, int) and self.N >= 8):
            raise ConfigError(f"N must be an integer >= 8, got {self.N!r}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.blowup_threshold > 0:
            raise ConfigError("blowup_threshold must be > 0")
        if not self.t_end > 0:
            raise ConfigError("t_end must be > 0")
        if not (self.cfl_advection > 0 and self.cfl_reaction > 0):
            raise ConfigError("CFL safety factors must be > 0")
        if not self.stiffness_shift > 0:
            raise ConfigError("stiffness_shift must be > 0")
        if any(t < 0 for t in self.snapshot_times):
            raise ConfigError("snapshot_times must be >= 0")


# -- manufactured solution ------------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """s*(t) = s0 + t, u* = v* = (s*^2 - x^2) / (2 mu (1 + rho) s*).

    The Stefan law holds exactly with s*' = 1; the PDEs are closed by the
    analytic sources returned from :meth:`sources`.
    """

    spec: ProblemSpec

    @property
    def c(self) -> float:
        return 2.0 * self.spec.mu * (1.0 + self.spec.rho)

    def front(self, t):
        return self.spec.s0 + t

    def amplitude(self, t):
        return 1.0 / (self.c * self.front(t))

    def u(self, t, x):
        s = self.front(t)
        return (s * s - x * x) / (self.c * s)

    v = u

    def stefan_speed(self, t) -> float:
        s = self.front(t)
        a = self.amplitude(t)
        return 2.0 * self.spec.mu * s * (a + self.spec.rho * a)

    def sources(self, t, x, shift_a=0.0, shift_b=0.0):
        sp = self.spec
        s = self.front(t)
        c = self.c
        u_t = -(s * s - x * x) / (c * s * s) + 2.0 / c
        u_xx = -2.0 / (c * s)
        u = self.u(t, x)
        s_u = u_t - sp.d1 * u_xx - np.power(np.maximum(u + shift_b, 0.0), sp.p)
        s_v = u_t - sp.d2 * u_xx - np.power(np.maximum(u + shift_a, 0.0), sp.q)
        return s_u, s_v

    def initial_data(self) -> InitialData:
        return InitialData.family("parabola", self.spec.s0 / self.c)


# -- single step ----------------------------------------------------------

def front_speed(w: np.ndarray, z: np.ndarray, s: float, spec: ProblemSpec) -> float:
    """s' = -(mu/s)(w_y(1) + rho z_y(1)), floored at zero."""
    dy = 1.0 / (len(w) - 1)
    wy = transform.boundary_slope(w, dy)
    zy = transform.boundary_slope(z, dy)
    speed = -spec.mu * (transform.physical_gradient(wy, s) + spec.rho * transform.physical_gradient(zy, s))
    if speed < 0.0:
        if speed < -1e-10 * (abs(wy) + spec.rho * abs(zy)) / s * spec.mu:
            log.debug("front speed %.3e floored at 0", speed)
        return 0.0
    return speed


def _diffusion_matrix(n: int, lam: float) -> np.ndarray:
    # unknowns 0..n-1; node n is the Dirichlet zero
    ab = np.empty((3, n))
    ab[0, :] = -lam
    ab[1, :] = 1.0 + 2.0 * lam
    ab[2, :] = -lam
    ab[0, 1] = -2.0 * lam  # mirror node w[-1] = w[1]
    return ab


def advance_step(
    state: FixedDomainState,
    spec: ProblemSpec,
    dt: float,
    source: ManufacturedSolution | None = None,
) -> FixedDomainState:
    """Advance one IMEX step of length dt; the returned state's ``clamps``
    counts negative round-off values set to zero."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    n = state.n
    dy = 1.0 / n
    w, z = state.w, state.z
    a, b = state.shift_a, state.shift_b

    speed = front_speed(w, z, state.s, spec)
    s_new = state.s + dt * speed
    t_new = state.t + dt
    y = np.linspace(0.0, 1.0, n + 1)
    f, g = transform.coefficients(s_new, speed, y)

    def explicit(field_, other, exponent, shift):
        grad = np.zeros(n)
        grad[1:] = (field_[2:] - field_[:-2]) / (2.0 * dy)
        return field_[:n] + dt * (g[:n] * grad + np.power(other[:n] + shift, exponent))

    rw = explicit(w, z, spec.p, b)
    rz = explicit(z, w, spec.q, a)
    if source is not None:
        s_u, s_v = source.sources(t_new, y[:n] * s_new, a, b)
        rw += dt * s_u
        rz += dt * s_v

    w_new = np.zeros(n + 1)
    z_new = np.zeros(n + 1)
    w_new[:n] = solve_banded((1, 1), _diffusion_matrix(n, dt * spec.d1 * f / dy**2), rw)
    z_new[:n] = solve_banded((1, 1), _diffusion_matrix(n, dt * spec.d2 * f / dy**2), rz)

    if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(z_new)) and math.isfinite(s_new)):
        raise NonFiniteValue(f"non-finite value at t = {t_new:.6g}")

    sup = max(state.sup(), float(w_new.max()), float(z_new.max()))
    floor = -CLAMP_RTOL * sup
    clamps = 0
    for arr in (w_new, z_new):
        neg = arr < 0.0
        if neg.any():
            if arr.min() < floor:
                raise StepRejected(f"negative value {arr.min():.3e} below {floor:.3e} at t = {t_new:.6g}")
            clamps += int(neg.sum())
            arr[neg] = 0.0

    new_speed = front_speed(w_new, z_new, s_new, spec)
    return FixedDomainState(t_new, s_new, new_speed, w_new, z_new, a, b, clamps)


# -- step-size control ------------------------------------------------------

def shift_floor(state: FixedDomainState, fallback: float) -> tuple[float, float]:
    """Shifts used in the stiffness estimate; a zero shift is replaced by
    ``fallback`` so p (z + shift)^(p-1) stays finite for p < 1."""
    return (state.shift_a if state.shift_a > 0 else fallback,
            state.shift_b if state.shift_b > 0 else fallback)


def stiffness_term(exponent: float, sup: float, shift: float, floor_shift: float) -> float:
    if exponent >= 1.0:
        return exponent * (sup + shift) ** (exponent - 1.0)
    # derivative of (x + shift)^e is largest at x = 0 for e < 1
    return exponent * floor_shift ** (exponent - 1.0)


def choose_dt(state: FixedDomainState, spec: ProblemSpec, config: SolverConfig) -> float:
    dy = 1.0 / state.n
    adv = config.cfl_advection * dy * state.s / max(state.s_prime, SPEED_EPS)
    fa, fb = shift_floor(state, config.stiffness_shift)
    stiffness = max(
        stiffness_term(spec.p, float(state.z.max()), state.shift_b, fb),
        stiffness_term(spec.q, float(state.w.max()), state.shift_a, fa),
        1.0,
    )
    dt = min(config.dt_max, adv, config.cfl_reaction / stiffness)
    if dt < config.dt_min:
        raise StepCollapse(dt, config.dt_min)
    return dt


# -- integration driver -----------------------------------------------------

def initial_state(problem: Problem, n: int, shifts: tuple[float, float] = (0.0, 0.0)) -> FixedDomainState:
    w0, z0 = problem.at_fixed_nodes(n)
    s0 = problem.spec.s0
    return FixedDomainState(0.0, s0, front_speed(w0, z0, s0, problem.spec), w0, z0, *shifts)


@dataclass
class _Member:
    spec: ProblemSpec
    state: FixedDomainState
    traj: Trajectory
    source: ManufacturedSolution | None
    clamps: int = 0
    active: bool = True


def simulate_coupled(
    runs: Sequence[tuple[Problem, tuple[float, float]]],
    config: SolverConfig,
    source_for: Callable[[ProblemSpec], ManufacturedSolution] | None = None,
) -> list[Trajectory]:
    """Integrate several problems on one shared step sequence.

    The step is the minimum of every active member's admissible step, so
    runs compared pointwise (ordered pairs, cascade levels) see identical
    time levels while all are alive.
    """
    if config.mms is not None and source_for is None:
        source_for = ManufacturedSolution
    members = []
    for problem, shifts in runs:
        a, b = float(shifts[0]), float(shifts[1])
        if a < 0 or b < 0:
            raise ConfigError("shifts must be >= 0")
        spec = problem.spec
        traj = Trajectory(spec=spec, shifts=(a, b))
        if not spec.lipschitz and a == 0.0 and b == 0.0:
            msg = "maximal-solution approximation; prefer cascade"
            traj.warnings.append(msg)
            log.warning("p=%g, q=%g with zero shifts: %s", spec.p, spec.q, msg)
        state = initial_state(problem, config.N, (a, b))
        traj.record(state, 0)
        traj.snapshots.append(state)
        members.append(_Member(spec, state, traj, source_for(spec) if source_for else None))

    targets = [t for t in config.snapshot_times if 0.0 < t < config.t_end] + [config.t_end]
    first = True
    t = 0.0
    while True:
        active = [m for m in members if m.active]
        if not active:
            break
        dt = config.dt_max
        for m in active:
            try:
                dt = min(dt, choose_dt(m.state, m.spec, config))
            except StepCollapse:
                _stop(m, "dt_collapse")
        active = [m for m in members if m.active]
        if not active:
            break
        if first:
            dt = min(dt, config.dt_init)
            first = False

        while targets and targets[0] <= t:
            targets.pop(0)
        target = targets[0]
        landing = t + dt >= target * (1.0 - 1e-14)
        if landing:
            dt = target - t

        new_states = _try_step(active, dt, config)
        if new_states is None:
            continue
        t = target if landing else t + dt
        for m, new in zip(active, new_states):
            if landing:
                new = replace(new, t=target)
            m.clamps += new.clamps
            m.state = new
            m.traj.record(new, m.clamps)
            m.traj.node_updates += 2 * new.n
            if landing:
                m.traj.snapshots.append(new)
            if max(m.traj.sup_u[-1], m.traj.sup_v[-1]) >= config.blowup_threshold:
                _stop(m, "threshold")
        if landing and target == config.t_end:
            for m in members:
                if m.active:
                    m.active = False
                    m.traj.status = "completed"
            break
    return [m.traj for m in members]


def _try_step(active: list[_Member], dt: float, config: SolverConfig):
    """Step every active member with dt, halving dt on rejection; returns
    None if some member collapsed (caller retries with the survivors)."""
    while True:
        try:
            return [advance_step(m.state, m.spec, dt, m.source) for m in active]
        except StepRejected as exc:
            dt *= 0.5
            log.debug("%s; retrying with dt = %.3e", exc, dt)
            if dt < config.dt_min:
                for m in active:
                    try:
                        advance_step(m.state, m.spec, dt * 2.0, m.source)
                    except StepRejected:
                        _stop(m, "dt_collapse")
                return None


def _stop(member: _Member, trigger: str) -> None:
    member.active = False
    member.traj.status = "blowup_detected"
    member.traj.blowup_trigger = trigger
    if member.state is not member.traj.snapshots[-1]:
        member.traj.snapshots.append(member.state)


def simulate(
    spec: ProblemSpec,
    data: InitialData,
    config: SolverConfig,
    shifts: tuple[float, float] = (0.0, 0.0),
) -> Trajectory:
    problem = validate_spec(spec, data, config.N)
    return simulate_coupled([(problem, shifts)], config)[0]


# -- manufactured-solution convergence -------------------------------------

@dataclass
class ConvergenceTable:
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> list[float]:
        return [r[name] for r in self.rows]


def run_mms(spec: ProblemSpec, config: SolverConfig) -> ConvergenceTable:
    """Refinement ladder against the manufactured moving-boundary solution.

    Returns max-norm errors of u, v and s at ``mms.t_end`` for each N,
    with the observed order of the u error between consecutive rungs.
    """
    mms = config.mms or MMSConfig()
    exact = ManufacturedSolution(spec)
    data = exact.initial_data()
    table = ConvergenceTable()
    prev = None
    for n in mms.ladder:
        dt = mms.dt_factor / n**2
        cfg = replace(
            config, N=n, dt_init=dt, dt_max=dt, dt_min=min(config.dt_min, dt),
            t_end=mms.t_end, snapshot_times=(), mms=mms,
        )
        traj = simulate(spec, data, cfg)
        final = traj.snapshots[-1]
        x = np.linspace(0.0, 1.0, n + 1) * final.s
        err_u = float(np.max(np.abs(final.w - exact.u(final.t, x))))
        err_v = float(np.max(np.abs(final.z - exact.v(final.t, x))))
        err_s = float(abs(final.s - exact.front(final.t)))
        order = math.nan if prev is None else math.log(prev[1] / err_u) / math.log(n / prev[0])
        table.rows.append({"N": n, "dt": dt, "err_u": err_u, "err_v": err_v, "err_s": err_s, "order_u": order})
        prev = (n, err_u)
    return table
