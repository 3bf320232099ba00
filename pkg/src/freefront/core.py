"""Domain types, parameter validation and built-in initial-data families.

The problem is the coupled system

    u_t - d1 u_xx = v^p,   v_t - d2 v_xx = u^q,   0 < x < s(t),
    s'(t) = -mu (u_x + rho v_x) at x = s(t),
    u_x = v_x = 0 at x = 0,  u = v = 0 at x = s(t),

with initial profiles positive on [0, s0), zero slope at 0 and zero at s0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

COMPAT_RTOL = 1e-10
FAMILIES = ("cosine", "parabola")


class FreeFrontError(Exception):
    """Base class for all package errors."""


class NonPositiveParameter(FreeFrontError, ValueError):
    def __init__(self, name: str, value: float):
        super().__init__(f"parameter {name} must be > 0, got {value!r}")
        self.name = name
        self.value = value


class IncompatibleInitialData(FreeFrontError, ValueError):
    def __init__(self, profile: str, condition: str, node: int | None = None):
        where = "" if node is None else f" at node {node}"
        super().__init__(f"{profile}: {condition}{where}")
        self.profile = profile
        self.condition = condition
        self.node = node


class UnknownFamily(FreeFrontError, ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    d1: float
    d2: float
    p: float
    q: float
    mu: float
    rho: float
    s0: float

    def __post_init__(self):
        for name in ("d1", "d2", "p", "q", "mu", "rho", "s0"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise NonPositiveParameter(name, value)

    @property
    def lipschitz(self) -> bool:
        return self.p >= 1 and self.q >= 1

    @property
    def pq(self) -> float:
        return self.p * self.q

    @property
    def d(self) -> float:
        return min(self.d1, self.d2)

    def swapped(self) -> ProblemSpec:
        """Relabel (u, d1, p) <-> (v, d2, q); the front law is preserved with
        rho -> 1/rho and mu -> mu*rho."""
        return ProblemSpec(
            d1=self.d2, d2=self.d1, p=self.q, q=self.p,
            mu=self.mu * self.rho, rho=1.0 / self.rho, s0=self.s0,
        )

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("d1", "d2", "p", "q", "mu", "rho", "s0")}


@dataclass(frozen=True)
class FamilyProfile:
    """A closed-form profile, sampled only at validation time."""

    name: str
    amplitude: float

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise UnknownFamily(f"unknown initial family {self.name!r}; expected one of {FAMILIES}")
        if not self.amplitude > 0:
            raise NonPositiveParameter("amplitude", self.amplitude)


@dataclass(frozen=True)
class InitialData:
    """Initial profiles u0, v0 on [0, s0].

    Each entry is a :class:`FamilyProfile` or a sequence of values at uniform
    nodes x_i = i*s0/(len-1).
    """

    u0: FamilyProfile | tuple[float, ...]
    v0: FamilyProfile | tuple[float, ...]

    def __post_init__(self):
        for name in ("u0", "v0"):
            value = getattr(self, name)
            if not isinstance(value, FamilyProfile):
                object.__setattr__(self, name, tuple(float(x) for x in value))

    @classmethod
    def family(cls, name: str, amplitude: float, amplitude_v: float | None = None) -> InitialData:
        return cls(FamilyProfile(name, amplitude),
                   FamilyProfile(name, amplitude if amplitude_v is None else amplitude_v))

    def swapped(self) -> InitialData:
        return InitialData(self.v0, self.u0)


@dataclass(frozen=True)
class Problem:
    """A validated problem: spec plus initial data sampled on uniform x-nodes."""

    spec: ProblemSpec
    u0: np.ndarray
    v0: np.ndarray

    @property
    def n_intervals(self) -> int:
        return len(self.u0) - 1

    def at_fixed_nodes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """w(0, y) = u0(s0 y) and z(0, y) = v0(s0 y) on y_i = i/n."""
        y = np.linspace(0.0, 1.0, n + 1)
        return _resample(self.u0, y), _resample(self.v0, y)


@dataclass(frozen=True)
class FixedDomainState:
    t: float
    s: float
    s_prime: float
    w: np.ndarray
    z: np.ndarray
    shift_a: float = 0.0
    shift_b: float = 0.0
    clamps: int = 0

    @property
    def n(self) -> int:
        return len(self.w) - 1

    @property
    def dy(self) -> float:
        return 1.0 / self.n

    def sup(self) -> float:
        return max(float(self.w.max()), float(self.z.max()))


@dataclass
class Trajectory:
    spec: ProblemSpec
    times: list[float] = field(default_factory=list)
    fronts: list[float] = field(default_factory=list)
    front_speeds: list[float] = field(default_factory=list)
    sup_u: list[float] = field(default_factory=list)
    sup_v: list[float] = field(default_factory=list)
    clamp_counts: list[int] = field(default_factory=list)
    snapshots: list[FixedDomainState] = field(default_factory=list)
    status: str = "running"
    blowup_trigger: str | None = None
    shifts: tuple[float, float] = (0.0, 0.0)
    warnings: list[str] = field(default_factory=list)
    node_updates: int = 0

    @property
    def clamp_events(self) -> int:
        return self.clamp_counts[-1] if self.clamp_counts else 0

    def record(self, state: FixedDomainState, clamps: int) -> None:
        self.times.append(state.t)
        self.fronts.append(state.s)
        self.front_speeds.append(state.s_prime)
        self.sup_u.append(float(state.w.max()))
        self.sup_v.append(float(state.z.max()))
        self.clamp_counts.append(clamps)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.asarray(self.times),
            "s": np.asarray(self.fronts),
            "s_prime": np.asarray(self.front_speeds),
            "sup_u": np.asarray(self.sup_u),
            "sup_v": np.asarray(self.sup_v),
        }


@dataclass(frozen=True)
class RunVerdict:
    kind: str  # GlobalCertified | GlobalHeuristic | BlowUp | Undecided
    evidence: dict = field(default_factory=dict)

    KINDS = ("GlobalCertified", "GlobalHeuristic", "BlowUp", "Undecided")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")


def make_initial_family(name: str, amplitude: float, s0: float, n: int) -> np.ndarray:
    """Sample a closed-form family on x_i = i*s0/n, i = 0..n."""
    if name not in FAMILIES:
        raise UnknownFamily(f"unknown initial family {name!r}; expected one of {FAMILIES}")
    if not amplitude > 0:
        raise NonPositiveParameter("amplitude", amplitude)
    if not s0 > 0:
        raise NonPositiveParameter("s0", s0)
    r = np.arange(n + 1) / n
    if name == "cosine":
        values = amplitude * np.cos(0.5 * np.pi * r)
    else:
        values = amplitude * (1.0 - r * r)
    values[0] = amplitude
    values[-1] = 0.0
    return values


def check_profile(name: str, values: Sequence[float], check_slope: bool = True) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or len(arr) < 3:
        raise IncompatibleInitialData(name, "need at least 3 samples")
    if not np.all(np.isfinite(arr)):
        raise IncompatibleInitialData(name, "non-finite sample", int(np.argmin(np.isfinite(arr))))
    if arr[-1] != 0.0:
        raise IncompatibleInitialData(name, f"{name}(s0) != 0 (got {arr[-1]!r})", len(arr) - 1)
    bad = np.flatnonzero(arr[:-1] <= 0.0)
    if bad.size:
        raise IncompatibleInitialData(name, f"{name} must be > 0 on [0, s0)", int(bad[0]))
    if not check_slope:
        return arr
    # second-order one-sided slope at x = 0, relative to the profile scale
    slope = -3.0 * arr[0] + 4.0 * arr[1] - arr[2]
    if abs(slope) > COMPAT_RTOL * max(abs(arr[0]), abs(arr[1]), abs(arr[2])):
        raise IncompatibleInitialData(name, f"{name}'(0) != 0 (one-sided difference {slope:.3e})", 0)
    return arr


def validate_spec(spec: ProblemSpec, data: InitialData, n: int = 64) -> Problem:
    """Check the problem parameters and initial data; sample closed-form families onto n intervals."""
    # ProblemSpec validates in __post_init__; re-run for specs built via object.__new__ etc.
    ProblemSpec.__post_init__(spec)
    profiles = []
    for name in ("u0", "v0"):
        raw = getattr(data, name)
        if isinstance(raw, FamilyProfile):
            # both families have u0'(0) = 0 analytically; the discrete slope test
            # would only measure the O(h^3) truncation of the cosine
            sampled = make_initial_family(raw.name, raw.amplitude, spec.s0, n)
            profiles.append(check_profile(name, sampled, check_slope=False))
        else:
            profiles.append(check_profile(name, raw))
    return Problem(spec, profiles[0], profiles[1])


def _resample(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    m = len(values) - 1
    if m == len(y) - 1:
        return np.array(values, dtype=float)
    nodes = np.arange(m + 1) / m
    out = np.interp(y, nodes, values)
    out[-1] = 0.0
    return out
