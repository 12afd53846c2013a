import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fsprivacy import (
    InteriorPolicy,
    RateOutOfRange,
    Region,
    RegionError,
    Strategy,
    canonicalize,
    classify,
    critical_rho,
    kkt_certificate,
    kl_divergence,
    proportionality,
    reduced_profiles,
    risk_surface,
    solve,
    thresholds,
)

from conftest import P_EX, Q_EX, instances, pmf_pairs


class TestThresholds:
    def test_example(self, example_view):
        t = thresholds(example_view)
        assert t.rho(2) == pytest.approx(0.299, abs=1e-3)
        assert t.rho(3) == pytest.approx(0.870, abs=1e-3)
        assert t.sigma(2) == pytest.approx(0.171, abs=1e-3)
        assert t.sigma(1) == pytest.approx(0.658, abs=1e-3)
        assert t.sigma(0) == 1.0
        assert t.rho(4) == math.inf

    def test_uniform_population(self):
        t = thresholds(canonicalize([0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3]))
        assert t.rho(2) == pytest.approx(0.1, abs=1e-12)
        assert t.sigma(2) == pytest.approx(0.2, abs=1e-12)

    def test_closed_formulas(self, example_view):
        # the recurrences agree with rho_i = P_i x_i - Q_i and sigma_j = Qbar_j - Pbar_j x_j
        v, t = example_view, thresholds(example_view)
        assert np.allclose(t.rho_thr, v.P * v.ratios - v.Q, atol=1e-12)
        assert np.allclose(t.sigma_thr[1:], v.Qbar - v.Pbar * v.ratios, atol=1e-12)

    @given(pmf_pairs(2, 10))
    def test_monotone_with_ties(self, qp):
        v = canonicalize(*qp)
        t = thresholds(v)
        assert t.rho_thr[0] == 0.0 and t.sigma_thr[-1] == 0.0
        assert np.all(np.diff(t.rho_thr) >= 0)
        assert np.all(np.diff(t.sigma_thr) <= 0)
        # exact ties give exactly equal thresholds; ratios apart by more than
        # round-off give distinct ones (ulp-level near-ties may go either way)
        gap = np.diff(v.ratios)
        tied, apart = gap == 0, gap > 1e-12
        rho_eq = t.rho_thr[1:] == t.rho_thr[:-1]
        sig_eq = t.sigma_thr[2:] == t.sigma_thr[1:-1]
        assert np.all(rho_eq[tied]) and np.all(sig_eq[tied])
        assert not np.any(rho_eq[apart]) and not np.any(sig_eq[apart])

    @given(pmf_pairs(3, 10))
    def test_slopes(self, qp):
        t = thresholds(canonicalize(*qp))
        m = t.slope[2:]
        assert np.all(m < 0)
        assert np.all(np.diff(m) <= 0)  # m_n <= ... <= m_2


class TestCriticalRho:
    def test_example(self, example_view):
        t = thresholds(example_view)
        assert critical_rho(t, 0.3) == pytest.approx(0.219, abs=1e-3)
        assert critical_rho(t, 0.0) == pytest.approx(0.870, abs=1e-3)
        assert critical_rho(t, 0.0) == pytest.approx(Q_EX[2] / P_EX[2] - 1, abs=1e-12)
        assert critical_rho(t, t.sigma_1) == pytest.approx(0.0, abs=1e-12)
        assert critical_rho(t, 0.9) == 0.0

    def test_domain(self, example_view):
        with pytest.raises(RateOutOfRange):
            critical_rho(thresholds(example_view), 1.0)

    @given(pmf_pairs(2, 8), st.floats(0, 0.999), st.floats(0, 0.999), st.floats(0, 1))
    def test_convex_decreasing(self, qp, a, b, lam):
        t = thresholds(canonicalize(*qp))
        f = lambda s: critical_rho(t, s)  # noqa: E731
        mid = lam * a + (1 - lam) * b
        assert f(mid) <= lam * f(a) + (1 - lam) * f(b) + 1e-9
        lo, hi = min(a, b), max(a, b)
        assert f(hi) <= f(lo) + 1e-12


class TestClassify:
    def test_example_noncritical(self, example_view):
        c = classify(thresholds(example_view), 0.1, 0.2)
        assert (c.kind, c.i, c.j) == (Region.NONCRITICAL, 1, 2)

    def test_example_interior(self, example_view):
        assert classify(thresholds(example_view), 0.3, 0.3).kind is Region.CRITICAL_INTERIOR

    def test_boundary(self, example_view):
        t = thresholds(example_view)
        assert classify(t, critical_rho(t, 0.3), 0.3).kind is Region.BOUNDARY

    def test_origin_groups_ties(self):
        v = canonicalize([0.1, 0.1, 0.4, 0.4], [0.2, 0.2, 0.3, 0.3])
        c = classify(thresholds(v), 0.0, 0.0)
        assert (c.kind, c.i, c.j) == (Region.NONCRITICAL, 2, 3)

    def test_origin_no_ties(self, example_view):
        c = classify(thresholds(example_view), 0.0, 0.0)
        assert (c.kind, c.i, c.j) == (Region.NONCRITICAL, 1, 3)

    def test_rates(self, example_view):
        t = thresholds(example_view)
        for rho, sigma in [(-0.1, 0), (0, -0.1), (0, 1.0), (math.nan, 0), (math.inf, 0)]:
            with pytest.raises(RateOutOfRange):
                classify(t, rho, sigma)


class TestSolveExamples:
    def test_panel_a(self, example_view):
        s = solve(example_view, 0.05, 0.10)
        assert np.allclose(s.strategy.r, [0.05, 0, 0], atol=1e-12)
        assert np.allclose(s.strategy.s, [0, 0, 0.10], atol=1e-12)
        assert np.allclose(s.t.mass, [0.189, 0.463, 0.347], atol=1e-3)
        assert s.risk == pytest.approx(0.131, abs=1e-3)

    def test_origin(self, example_view):
        s = solve(example_view, 0, 0)
        assert not s.strategy.r.any() and not s.strategy.s.any()
        assert s.risk == pytest.approx(0.263, abs=1e-3)

    def test_panel_b(self, example_view):
        s = solve(example_view, 0.1, 0.2)
        assert s.strategy.s[1] == pytest.approx(0.44 - 0.39 * 0.67 / 0.62, abs=1e-12)
        assert s.strategy.s[2] == pytest.approx(0.181, abs=1e-3)
        assert s.risk == pytest.approx(0.050, abs=1e-3)

    def test_panel_c(self, example_view):
        t = thresholds(example_view)
        s = solve(example_view, critical_rho(t, 0.3), 0.3)
        assert np.allclose(s.t.mass, P_EX, atol=1e-12)
        assert s.risk == 0.0
        assert solve(example_view, 0.219, 0.3).risk < 1e-6

    def test_interior_policies(self, example_view):
        exact = solve(example_view, 0.3, 0.3)
        assert exact.region.kind is Region.CRITICAL_INTERIOR
        assert exact.strategy.rho == pytest.approx(0.3, abs=1e-12)
        assert exact.strategy.sigma == pytest.approx(0.3, abs=1e-12)
        assert np.allclose(exact.t.mass, P_EX, atol=1e-12)
        eco = solve(example_view, 0.3, 0.3, InteriorPolicy.ECONOMICAL)
        rc = critical_rho(thresholds(example_view), 0.3)
        assert eco.strategy.rho == pytest.approx(rc, abs=1e-12)
        assert eco.unused_forgery == pytest.approx(0.3 - rc, abs=1e-12)
        assert np.allclose(eco.t.mass, P_EX, atol=1e-12)
        assert solve(example_view, 0.3, 0.3, "economical").policy is InteriorPolicy.ECONOMICAL

    def test_crit_ratio(self, example_view):
        assert solve(example_view, 0.3, 0.3).crit_ratio == pytest.approx(1.368, abs=1e-3)
        assert solve(example_view, 0.05, 0.1).crit_ratio == pytest.approx(0.093, abs=1e-3)

    def test_degenerate(self):
        v = canonicalize([0.3, 0.7], [0.3, 0.7])
        s = solve(v, 0, 0)
        assert s.degenerate and s.risk == 0 and s.region.kind is Region.BOUNDARY
        assert not s.strategy.r.any() and not s.strategy.s.any()
        s = solve(v, 0.2, 0.1)
        assert s.risk == 0 and s.strategy.rho == pytest.approx(0.2) and s.strategy.sigma == pytest.approx(0.1)


class TestProportionality:
    def test_boundary(self, example_view):
        t = thresholds(example_view)
        rc = critical_rho(t, 0.3)
        phi, chi = proportionality(example_view, classify(t, rc, 0.3), rc, 0.3)
        assert phi == pytest.approx(1, abs=1e-9) and chi == pytest.approx(1, abs=1e-9)

    def test_example(self, example_view):
        c = classify(thresholds(example_view), 0.05, 0.1)
        phi, chi = proportionality(example_view, c, 0.05, 0.1)
        assert phi == pytest.approx(0.498, abs=2e-3)
        assert chi == pytest.approx(1.510, abs=2e-3)

    def test_interior(self, example_view):
        c = classify(thresholds(example_view), 0.3, 0.3)
        with pytest.raises(RegionError):
            proportionality(example_view, c, 0.3, 0.3)


class TestCertificate:
    def test_closed_form(self, example_view):
        c = kkt_certificate(example_view, solve(example_view, 0.05, 0.1).strategy)
        assert c.valid and c.max_violation <= 1e-9

    def test_zero_strategy(self, example_view):
        assert kkt_certificate(example_view, Strategy.zero(3)).valid

    def test_swapped(self, example_view):
        bad = Strategy([0, 0, 0.05], [0.10, 0, 0])
        assert not kkt_certificate(example_view, bad).valid


# -- properties ----------------------------------------------------------------


@given(instances())
def test_solution_properties(inst):
    view, rho, sigma = inst
    sol = solve(view, rho, sigma)
    r, s = sol.strategy.r, sol.strategy.s
    assert abs(r.sum() - rho) <= 1e-9 and abs(s.sum() - sigma) <= 1e-9
    assert abs(sol.t.mass.sum() - 1) <= 1e-9
    assert np.all(view.q + r - s >= -1e-12)
    assert sol.risk >= 0
    assert (sol.risk <= 1e-12) == (sol.region.kind is not Region.NONCRITICAL)
    if sol.region.kind is not Region.CRITICAL_INTERIOR:
        assert np.all(r * s == 0)
        assert abs(sol.risk - sol.risk_reduced) <= 1e-9
        assert sol.phi <= 1 + 1e-12 <= sol.chi + 2e-12
        on_boundary = sol.region.kind is Region.BOUNDARY
        if not on_boundary and not view.degenerate:
            assert sol.phi < 1 < sol.chi
    assert kkt_certificate(view, sol.strategy, tol=1e-8).valid


@given(instances())
def test_proportionality_structure(inst):
    view, rho, sigma = inst
    sol = solve(view, rho, sigma)
    assume(sol.region.kind is Region.NONCRITICAL)
    i, j = sol.region.i, sol.region.j
    ratio = sol.t.mass / view.p
    assert np.allclose(ratio[:i], sol.phi, rtol=1e-9)
    assert np.allclose(ratio[j - 1:], sol.chi, rtol=1e-9)
    mid = ratio[i:j - 1]
    assert np.all(np.diff(mid) >= -1e-12)
    assert np.all(mid >= sol.phi - 1e-9) and np.all(mid <= sol.chi + 1e-9)


@given(instances(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_constants_monotone_within_cell(inst, a, b):
    view, rho, sigma = inst
    t = thresholds(view)
    c = classify(t, rho, sigma)
    assume(c.kind is Region.NONCRITICAL and c.i >= 1)
    # a small box inside the current cell
    r_lo, r_hi = t.rho(c.i), min(t.rho(c.i + 1), c.rho_crit)
    s_lo, s_hi = t.sigma(c.j), t.sigma(c.j - 1)
    assume(r_hi - r_lo > 1e-6 and s_hi - s_lo > 1e-6)
    r0, r1 = r_lo + a * (r_hi - r_lo) * 0.5, r_lo + (a * 0.5 + 0.4) * (r_hi - r_lo)
    s0 = s_lo + b * (s_hi - s_lo) * 0.5 + 1e-9
    s1 = s_lo + (b * 0.5 + 0.4) * (s_hi - s_lo)
    pts = [(r0, s0), (r1, s0), (r0, s1)]
    assume(all(classify(t, x, y).kind is Region.NONCRITICAL for x, y in pts))
    assume(all((classify(t, x, y).i, classify(t, x, y).j) == (c.i, c.j) for x, y in pts))
    (f00, c00), (f10, c10), (f01, c01) = (proportionality(view, classify(t, x, y), x, y) for x, y in pts)
    assert f10 > f00 and c10 < c00
    assert f01 > f00 and c01 < c00


@given(pmf_pairs(2, 8), st.data())
def test_continuity_across_thresholds(qp, data):
    view = canonicalize(*qp)
    assume(not view.degenerate)
    t = thresholds(view)
    sigma_fixed = data.draw(st.floats(0, 0.5)) * t.sigma_1
    for k in range(2, view.n + 1):
        rho = t.rho(k)
        if rho - 1e-9 <= 0:
            continue
        lo, hi = solve(view, rho - 1e-9, sigma_fixed), solve(view, rho + 1e-9, sigma_fixed)
        assert np.max(np.abs(lo.strategy.r - hi.strategy.r)) <= 1e-6
        assert np.max(np.abs(lo.strategy.s - hi.strategy.s)) <= 1e-6
    for k in range(1, view.n):
        sigma = t.sigma(k)
        if sigma - 1e-9 <= 0 or sigma + 1e-9 >= 1:
            continue
        lo, hi = solve(view, 0.0, sigma - 1e-9), solve(view, 0.0, sigma + 1e-9)
        assert np.max(np.abs(lo.strategy.s - hi.strategy.s)) <= 1e-6


@given(pmf_pairs(2, 8), st.floats(0, 1), st.floats(0, 0.999), st.floats(0, 2), st.floats(0, 1), st.floats(0, 1))
def test_critical_region_convex(qp, s1, s2, extra, extra2, lam):
    view = canonicalize(*qp)
    t = thresholds(view)
    a = (critical_rho(t, s1 * 0.999) + extra, s1 * 0.999)
    b = (critical_rho(t, s2) + extra2, s2)
    mid = (lam * a[0] + (1 - lam) * b[0], lam * a[1] + (1 - lam) * b[1])
    assert classify(t, *mid).kind is not Region.NONCRITICAL


@given(instances(), st.lists(st.floats(0, 2), min_size=1, max_size=4), st.lists(st.floats(0, 0.99), min_size=1, max_size=4))
def test_risk_surface_matches_solve(inst, rs, ss):
    view, _, _ = inst
    grid = risk_surface(view, rs, ss)
    for a, r in enumerate(rs):
        for b, s in enumerate(ss):
            assert grid[a, b] == pytest.approx(solve(view, r, s).risk, abs=1e-9)


@given(instances())
def test_reduced_form(inst):
    view, rho, sigma = inst
    sol = solve(view, rho, sigma)
    assume(sol.region.kind is Region.NONCRITICAL)
    i, j = sol.region.i, sol.region.j
    q_red, p_red = reduced_profiles(view, i, j)
    assert len(q_red) == j - i + 1
    assert q_red.sum() == pytest.approx(1) and p_red.sum() == pytest.approx(1)
    u = q_red.copy()
    u[0] += rho
    u[-1] -= sigma
    assert kl_divergence(u / (1 + rho - sigma), p_red) == pytest.approx(sol.risk, abs=1e-9)
