"""Front-fixing change of variables y = x / s(t).

With w(t, y) = u(t, x) the moving-boundary problem becomes

    w_t - d1 f(t) w_yy - g(t, y) w_y = z^p   on 0 < y < 1,

where f = s^-2 and g = y s'/s. All solver arithmetic happens on the unit
interval; physical fields are rebuilt with :func:`from_fixed`.
"""

from __future__ import annotations

import numpy as np

from .core import FreeFrontError


class OutOfDomain(FreeFrontError, ValueError):
    pass


class GridTooCoarse(FreeFrontError, ValueError):
    pass


def to_fixed(x, s):
    if not s > 0:
        raise OutOfDomain(f"front position must be > 0, got {s!r}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > s):
        raise OutOfDomain(f"x must lie in [0, {s}]")
    return x / s


def from_fixed(y, s):
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0) or np.any(ya > 1):
        raise OutOfDomain("y must lie in [0, 1]")
    return y * s


def coefficients(s: float, s_prime: float, y):
    """Diffusion scaling f = s^-2 and advection coefficient g = y s'/s."""
    if not s > 0:
        raise OutOfDomain(f"front position must be > 0, got {s!r}")
    return 1.0 / (s * s), y * s_prime / s


def physical_gradient(w_y, s: float):
    return w_y / s


def boundary_slope(profile, dy: float) -> float:
    """Second-order one-sided difference for the slope at y = 1.

    Exact for quadratics.
    """
    n = len(profile) - 1
    if n < 2:
        raise GridTooCoarse(f"need at least 2 intervals, got {n}")
    return (3.0 * profile[n] - 4.0 * profile[n - 1] + profile[n - 2]) / (2.0 * dy)
