import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from freefront.analysis import (
    InvalidBound,
    SuperSolution,
    TooShort,
    WrongRegime,
    c1_norm,
    certify_global,
    check_small_data,
    decay_diagnostic,
    detect_blowup,
    estimate_t_max,
    eval_supersolution,
    find_eps,
    front_speed_bound,
)
from freefront.core import ProblemSpec, Trajectory
from freefront.transform import OutOfDomain


def unit(**kw):
    base = dict(d1=1.0, d2=1.0, p=2.0, q=2.0, mu=1.0, rho=1.0, s0=1.0)
    base.update(kw)
    return ProblemSpec(**base)


def synthetic(times, sup, spec=None, status="completed", speeds=None):
    tr = Trajectory(spec=spec or unit())
    n = len(times)
    tr.times = list(map(float, times))
    tr.sup_u = list(map(float, sup))
    tr.sup_v = list(map(float, sup))
    tr.fronts = [1.0] * n
    tr.front_speeds = list(speeds) if speeds is not None else [0.0] * n
    tr.clamp_counts = [0] * n
    tr.status = status
    return tr


def brute_force_eps(spec, samples=400_001):
    """Largest symmetric eps on a dense grid below the strict cap."""
    cap = spec.d / (8 * spec.mu * (1 + spec.rho))
    eps = np.linspace(0.0, cap, samples)[1:-1]
    d, s0 = spec.d, spec.s0
    ok = (eps * d - 16 * s0**2 * eps**spec.p >= 0) & (eps * d - 16 * s0**2 * eps**spec.q >= 0)
    return eps[ok].max(), cap / samples


# -- small-data conditions ----------------------------------------------------

def test_feasible_at_one_thirty_second():
    assert check_small_data(unit(), 1 / 32, 1 / 32)


def test_infeasible_at_cap():
    res = check_small_data(unit(), 1 / 16, 1 / 16)
    assert not res
    assert "below" in res.reason


def test_eps_must_be_positive():
    with pytest.raises(ValueError):
        check_small_data(unit(), 0.0, 0.1)


def test_certificate_needs_superlinear_product():
    with pytest.raises(WrongRegime):
        check_small_data(unit(p=1.0, q=1.0), 0.01, 0.01)
    with pytest.raises(WrongRegime):
        find_eps(unit(p=0.5, q=2.0))


def test_find_eps_unit_problem():
    assert find_eps(unit()) == pytest.approx(1 / 16, rel=1e-5)
    assert find_eps(unit()) < 1 / 16


@pytest.mark.parametrize("spec", [unit(q=3.0), unit(p=3.0, q=1.5, d1=0.5), unit(mu=1e6), unit(s0=2.0, rho=3.0)])
def test_find_eps_against_dense_scan(spec):
    expected, step = brute_force_eps(spec)
    got = find_eps(spec)
    assert abs(got - expected) <= max(2 * step, 2e-6 * expected)
    assert check_small_data(spec, got, got)


def test_find_eps_huge_mu_hits_cap():
    spec = unit(mu=1e6)
    assert find_eps(spec) == pytest.approx(1 / (16 * 1e6), rel=1e-5)


def test_find_eps_none_when_symmetric_infeasible():
    # eps - 16 eps >= 0 has no positive solution for p = 1
    assert find_eps(unit(p=1.0, q=2.0)) is None


# -- super-solution -------------------------------------------------------------

def test_supersolution_rates():
    ss = SuperSolution(unit(), 0.05, 0.05)
    assert ss.b == 1 / 16 and ss.a == 1 / 16 and ss.gamma == 1 / 32
    s, u, v = eval_supersolution(ss, 0.0, 0.0)
    assert s == 2.0 and u == 0.05 and v == 0.05


def test_supersolution_limits():
    ss = SuperSolution(unit(), 0.05, 0.05)
    s, u, _ = ss(1e4, 0.0)
    assert s == pytest.approx(4.0) and u == pytest.approx(0.0, abs=1e-100)


def test_supersolution_out_of_domain():
    ss = SuperSolution(unit(), 0.05, 0.05)
    with pytest.raises(OutOfDomain):
        ss(0.0, 2.5)
    with pytest.raises(OutOfDomain):
        ss(-1.0, 0.0)


def test_residuals_match_finite_differences():
    spec = unit(d1=0.7, d2=1.3, p=1.5, q=2.5, mu=0.4, rho=2.0, s0=1.3)
    ss = SuperSolution(spec, 0.02, 0.03)
    t, h = 2.0, 1e-4
    x = np.linspace(0.0, 0.9 * ss.front(t), 7)

    def fields(tt, xx):
        return ss(tt, xx)[1:]

    (u, v), (up, vp), (um, vm) = fields(t, x), fields(t + h, x), fields(t - h, x)
    (ur, vr), (ul, vl) = fields(t, x + h), fields(t, np.maximum(x - h, 0))
    u_t, v_t = (up - um) / (2 * h), (vp - vm) / (2 * h)
    # even extension handles x = 0
    ul[0], vl[0] = ur[0], vr[0]
    u_xx, v_xx = (ur - 2 * u + ul) / h**2, (vr - 2 * v + vl) / h**2
    ru, rv, stefan = ss.residuals(t, x)
    np.testing.assert_allclose(ru, u_t - spec.d1 * u_xx - v**spec.p, atol=1e-7)
    np.testing.assert_allclose(rv, v_t - spec.d2 * v_xx - u**spec.q, atol=1e-7)

    s = ss.front(t)
    ds = (ss.front(t + h) - ss.front(t - h)) / (2 * h)
    ux = (fields(t, s)[0] - fields(t, s - h)[0]) / h
    vx = (fields(t, s)[1] - fields(t, s - h)[1]) / h
    assert stefan == pytest.approx(ds + spec.mu * (ux + spec.rho * vx), abs=1e-5)


@settings(max_examples=80, deadline=None)
@given(
    p=st.floats(1.0, 4.0), q=st.floats(1.0, 4.0),
    d1=st.floats(0.1, 10.0), d2=st.floats(0.1, 10.0),
    mu=st.floats(0.1, 10.0), rho=st.floats(0.1, 10.0), s0=st.floats(0.2, 5.0),
    t=st.floats(0.0, 200.0),
)
def test_supersolution_pde_residuals_nonnegative(p, q, d1, d2, mu, rho, s0, t):
    assume(p * q > 1.01)
    spec = ProblemSpec(d1, d2, p, q, mu, rho, s0)
    eps = find_eps(spec)
    assume(eps is not None)
    ss = SuperSolution(spec, eps, eps)
    x = np.linspace(0.0, 1.0, 257) * ss.front(t)
    ru, rv, _ = ss.residuals(t, x)
    scale = eps * max(1.0, d1, d2) / s0**2
    assert ru.min() >= -1e-12 * scale
    assert rv.min() >= -1e-12 * scale


def test_supersolution_stefan_excess_window():
    # the front barrier relaxes at rate a while v decays at the slower rate b/p,
    # so the free-boundary inequality holds only on a finite window
    ss = SuperSolution(unit(), find_eps(unit()), find_eps(unit()))
    early = [ss.residuals(t, 0.0)[2] for t in np.linspace(0.0, 30.0, 301)]
    assert min(early) >= 0
    assert ss.residuals(50.0, 0.0)[2] < 0


# -- certify_global -------------------------------------------------------------

def test_small_data_run_is_certified(small_data_run):
    verdict = certify_global(small_data_run)
    assert verdict.kind == "GlobalCertified"
    assert verdict.evidence["eps1"] == pytest.approx(1 / 16, rel=1e-5)
    assert verdict.evidence["margin"] > 0


def test_linear_reaction_is_heuristic(linear_run):
    assert certify_global(linear_run).kind == "GlobalHeuristic"


def test_large_data_verdict_is_blowup(blowup_run):
    verdict = certify_global(blowup_run)
    assert verdict.kind == "BlowUp"
    assert verdict.evidence["trigger"] == "threshold"


def test_data_above_half_eps_is_undecided():
    tr = synthetic(np.linspace(0, 1, 5), [0.05] * 5)
    verdict = certify_global(tr)
    assert verdict.kind == "Undecided"
    assert "exceed" in verdict.evidence["reason"]


# -- blow-up detection ----------------------------------------------------------

def test_threshold_fires_at_first_crossing():
    ev = detect_blowup(synthetic([0, 1, 2, 3], [1, 10, 1e3, 1e9]))
    assert ev.t_cross == 3.0 and ev.trigger == "threshold"


def test_bounded_series_has_no_blowup():
    assert detect_blowup(synthetic(np.linspace(0, 5, 20), np.exp(-np.linspace(0, 5, 20)))) is None


def test_dt_collapse_trigger_reported():
    tr = synthetic([0, 1, 2], [1, 2, 3], status="blowup_detected")
    tr.blowup_trigger = "dt_collapse"
    ev = detect_blowup(tr)
    assert ev.trigger == "dt_collapse" and ev.t_cross == 2.0


def test_detect_needs_three_samples():
    with pytest.raises(TooShort):
        detect_blowup(synthetic([0, 1], [1, 2]))


def test_synthetic_blowup_time_recovered():
    # oracle: sup(t) = (1 - t)^(-1/(pq - 1)) blows up exactly at t = 1
    pq = 4.0
    t = np.linspace(0.8, 0.95, 16)
    est, resid = estimate_t_max(t, (1.0 - t) ** (-1.0 / (pq - 1.0)), pq)
    assert est == pytest.approx(1.0, abs=0.02)
    assert resid < 1e-10


def test_t_max_dropped_for_growing_reciprocal():
    t = np.linspace(0, 1, 10)
    assert estimate_t_max(t, np.exp(-t), 4.0)[0] is None
    assert estimate_t_max(t, np.exp(t), 1.0) == (None, None)


def test_blowup_estimate_near_crossing(blowup_run):
    ev = detect_blowup(blowup_run)
    assert ev.t_max_estimate == pytest.approx(ev.t_cross, rel=0.02)


# -- front-speed bound ----------------------------------------------------------

def test_front_speed_bound_worked_example():
    spec = unit(d1=0.5, d2=0.5)
    assert front_speed_bound(1.0, spec, 0.75, 0.75) == 4.0


def test_front_speed_bound_large_m_dominated_by_reaction():
    spec = unit()
    for m in (1e2, 1e4, 1e6):
        expected = 2 * m * math.sqrt(m / 2) * 2
        assert front_speed_bound(m, spec, 1.0, 1.0) == pytest.approx(expected)


def test_front_speed_bound_rejects_bad_input():
    with pytest.raises(InvalidBound):
        front_speed_bound(0.0, unit(), 1.0, 1.0)
    with pytest.raises(InvalidBound):
        front_speed_bound(1.0, unit(), 0.0, 1.0)


def test_c1_norm_of_parabola():
    x = np.linspace(0, 2, 65)
    # max |A(1 - (x/2)^2)| + max |A x / 2| = A + A
    assert c1_norm(3 * (1 - (x / 2) ** 2), 2.0) == pytest.approx(6.0, rel=1e-12)


def test_small_data_speed_below_bound(small_data_run):
    tr = small_data_run
    m = max(max(tr.sup_u), max(tr.sup_v))
    first = tr.snapshots[0]
    bound = front_speed_bound(m, tr.spec, c1_norm(first.w, first.s), c1_norm(first.z, first.s))
    assert max(tr.front_speeds) <= 1.05 * bound


# -- decay ---------------------------------------------------------------------

def test_long_small_data_run_decays(long_small_data_run):
    rep = decay_diagnostic(long_small_data_run)
    assert rep.consistent
    assert long_small_data_run.sup_u[-1] < 1e-3
    assert rep.front_speed_tail_max < 1e-4
    assert rep.decay_rate > 0


def test_decay_flag_unset_after_blowup(blowup_run):
    rep = decay_diagnostic(blowup_run)
    assert not rep.consistent
    assert any("blowup_detected" in n for n in rep.notes)


def test_constant_series_not_decaying():
    rep = decay_diagnostic(synthetic(np.linspace(0, 10, 40), [0.5] * 40))
    assert rep.decay_rate == pytest.approx(0.0, abs=1e-12)
    assert not rep.consistent


def test_exponential_decay_rate_recovered():
    t = np.linspace(0, 10, 50)
    rep = decay_diagnostic(synthetic(t, 0.1 * np.exp(-0.3 * t)))
    assert rep.decay_rate == pytest.approx(0.3, rel=1e-9)
    assert rep.consistent


def test_decay_needs_tail_samples():
    with pytest.raises(TooShort):
        decay_diagnostic(synthetic(np.linspace(0, 1, 6), [1.0] * 6))
