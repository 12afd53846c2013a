"""Closed-form optimal forgery/suppression strategies and their KKT certificate.

Indices in the public types follow the 1-based category labels of the
canonical ordering: ``i`` is the number of leading categories receiving
forgery, ``j`` the first category receiving suppression. ``i = 0`` and
``j = 1`` only occur once pure suppression alone has reached zero risk.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import RateOutOfRange, RegionError
from .profile import (
    NEG_SLACK,
    CanonicalView,
    Pmf,
    Strategy,
    apparent_profile,
    check_strategy,
    kl_divergence,
)

BOUNDARY_TOL = 1e-9


class Region(enum.Enum):
    NONCRITICAL = "noncritical"
    BOUNDARY = "boundary"
    CRITICAL_INTERIOR = "critical_interior"


class InteriorPolicy(enum.Enum):
    EXACT_BUDGET = "exact"
    ECONOMICAL = "economical"


@dataclass(frozen=True)
class ThresholdTable:
    """Forgery thresholds ``rho_thr[i-1] = rho_i`` (i = 1..n), suppression
    thresholds ``sigma_thr[j] = sigma_j`` (j = 0..n, with ``sigma_0 = 1``) and
    the critical lines ``rho = slope[j] * sigma + intercept[j]`` for j = 2..n
    (entries 0 and 1 of ``slope``/``intercept`` are unused and hold nan).
    """

    rho_thr: np.ndarray
    sigma_thr: np.ndarray
    slope: np.ndarray
    intercept: np.ndarray

    @property
    def n(self) -> int:
        return self.rho_thr.size

    def rho(self, i: int) -> float:
        """rho_i, with the sentinel rho_{n+1} = inf."""
        return math.inf if i > self.n else float(self.rho_thr[i - 1])

    def sigma(self, j: int) -> float:
        return float(self.sigma_thr[j])

    @property
    def rho_n(self) -> float:
        return float(self.rho_thr[-1])

    @property
    def sigma_1(self) -> float:
        return float(self.sigma_thr[1])


def thresholds(view: CanonicalView) -> ThresholdTable:
    """Forgery/suppression thresholds of a canonical view.

    The thresholds are accumulated through the recurrences
    ``rho_{i+1} = rho_i + P_i (x_{i+1} - x_i)`` and
    ``sigma_{j-1} = sigma_j + Pbar_j (x_j - x_{j-1})`` (``x`` the sorted
    ratios), which are algebraically identical to the direct formulas but make
    tied ratios produce exactly tied thresholds.
    """
    x, P, Pbar, Q = view.ratios, view.P, view.Pbar, view.Q
    n = view.n
    steps = np.diff(x)
    rho_thr = np.concatenate([[0.0], np.cumsum(P[:-1] * steps)])
    # sigma_j for j = n..1 accumulated backwards; Pbar_j multiplies (x_j - x_{j-1})
    sig_rev = np.concatenate([[0.0], np.cumsum((Pbar[1:] * steps)[::-1])])
    sigma_thr = np.concatenate([[1.0], sig_rev[::-1]])
    slope = np.full(n + 1, np.nan)
    intercept = np.full(n + 1, np.nan)
    for j in range(2, n + 1):
        slope[j] = -P[j - 2] / Pbar[j - 1]
        intercept[j] = (P[j - 2] - Q[j - 2]) / Pbar[j - 1]
    for a in (rho_thr, sigma_thr, slope, intercept):
        a.setflags(write=False)
    return ThresholdTable(rho_thr, sigma_thr, slope, intercept)


def _check_rates(rho, sigma):
    if not (math.isfinite(rho) and rho >= 0):
        raise RateOutOfRange(f"forgery rate must be a finite number >= 0, got {rho}")
    if not (math.isfinite(sigma) and 0 <= sigma < 1):
        raise RateOutOfRange(f"suppression rate must lie in [0, 1), got {sigma}")


def suppression_index(table: ThresholdTable, sigma) -> np.ndarray | int:
    """Index j of the suppression cell (sigma_j, sigma_{j-1}] holding ``sigma``.

    At ``sigma = 0`` the cell is the first one whose lower threshold is zero,
    so tied maximal ratios are grouped together. Returns 1 past sigma_1.
    Vectorized over ``sigma``.
    """
    sig = np.asarray(sigma, dtype=float)
    asc = table.sigma_thr[1:][::-1]  # sigma_n, ..., sigma_1
    count = np.where(
        sig > 0,
        np.searchsorted(asc, sig, side="left"),
        np.searchsorted(asc, 0.0, side="right"),
    )
    j = table.n - count + 1
    return int(j) if j.ndim == 0 else j


def forgery_index(table: ThresholdTable, rho, j) -> np.ndarray | int:
    """Index i of the forgery cell (rho_i, rho_{i+1}], capped at j - 1.

    ``rho = 0`` falls in the cell of the last threshold equal to zero.
    """
    r = np.asarray(rho, dtype=float)
    count = np.where(
        r > 0,
        np.searchsorted(table.rho_thr, r, side="left"),
        np.searchsorted(table.rho_thr, 0.0, side="right"),
    )
    i = np.minimum(count, np.asarray(j) - 1)
    return int(i) if i.ndim == 0 else i


def _critical_from_j(table: ThresholdTable, sigma, j):
    j = np.asarray(j)
    jj = np.where(j >= 2, j, 2)
    val = table.slope[jj] * sigma + table.intercept[jj]
    return np.where(j >= 2, np.maximum(val, 0.0), 0.0)


def critical_rho(table: ThresholdTable, sigma: float) -> float:
    """Smallest forgery rate reaching zero risk at suppression rate ``sigma``."""
    if not (math.isfinite(sigma) and 0 <= sigma < 1):
        raise RateOutOfRange(f"suppression rate must lie in [0, 1), got {sigma}")
    return float(_critical_from_j(table, sigma, suppression_index(table, sigma)))


@dataclass(frozen=True)
class RegionClass:
    kind: Region
    i: int
    j: int
    rho_crit: float


def classify(table: ThresholdTable, rho: float, sigma: float) -> RegionClass:
    _check_rates(rho, sigma)
    j = suppression_index(table, sigma)
    rc = float(_critical_from_j(table, sigma, j))
    if abs(rho - rc) <= BOUNDARY_TOL:
        kind = Region.BOUNDARY
    elif rho > rc:
        kind = Region.CRITICAL_INTERIOR
    else:
        kind = Region.NONCRITICAL
    i = j - 1 if kind is Region.CRITICAL_INTERIOR else forgery_index(table, rho, j)
    return RegionClass(kind, int(i), int(j), rc)


def reduced_profiles(view: CanonicalView, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate categories 1..i and j..n into single cells: (q~, p~)."""
    q, p = view.q, view.p
    if j == 1:
        return np.array([1.0]), np.array([1.0])
    mid = slice(i, j - 1)
    q_red = np.concatenate([[view.Q[i - 1]], q[mid], [view.Qbar[j - 1]]])
    p_red = np.concatenate([[view.P[i - 1]], p[mid], [view.Pbar[j - 1]]])
    return q_red, p_red


def proportionality(view: CanonicalView, region: RegionClass, rho: float, sigma: float):
    """Common ratios t*_k/p_k on the forgery block (phi) and suppression block (chi)."""
    if region.kind is Region.CRITICAL_INTERIOR:
        raise RegionError("proportionality constants are only defined on the closure of the noncritical region")
    i, j = region.i, region.j
    total = 1.0 + rho - sigma
    phi = 1.0 if i == 0 else (view.Q[i - 1] + rho) / (total * view.P[i - 1])
    chi = (view.Qbar[j - 1] - sigma) / (total * view.Pbar[j - 1])
    return float(phi), float(chi)


@dataclass(frozen=True)
class Solution:
    rho: float
    sigma: float
    strategy: Strategy
    t: Pmf
    risk: float
    risk_reduced: float
    region: RegionClass
    phi: float
    chi: float
    reduced_q: np.ndarray
    reduced_p: np.ndarray
    policy: InteriorPolicy
    unused_forgery: float = 0.0
    degenerate: bool = False

    @property
    def rho_crit(self) -> float:
        return self.region.rho_crit

    @property
    def crit_ratio(self) -> float:
        """rho / rho_crit(sigma); infinite when the critical rate is zero."""
        if self.region.rho_crit == 0:
            return math.inf if self.rho > 0 else 1.0
        return self.rho / self.region.rho_crit


def _closed_form(view: CanonicalView, i: int, j: int, rho: float, sigma: float) -> Strategy:
    n = view.n
    r = np.zeros(n)
    s = np.zeros(n)
    if i >= 1:
        r[:i] = view.p[:i] / view.P[i - 1] * (view.Q[i - 1] + rho) - view.q[:i]
    s[j - 1:] = view.q[j - 1:] - view.p[j - 1:] / view.Pbar[j - 1] * (view.Qbar[j - 1] - sigma)
    # round-off at cell edges can leave -1e-17 residues
    return Strategy(np.where(np.abs(r) < NEG_SLACK, 0.0, r), np.where(np.abs(s) < NEG_SLACK, 0.0, s))


def pad_strategy(view: CanonicalView, u, rho: float, sigma: float) -> Strategy:
    """Strategy realizing the unnormalized apparent mass ``u = q + r - s`` with
    exact budgets: the positive/negative parts of ``u - q`` plus a common
    padding ``alpha_k`` proportional to ``p_k`` added to both ``r`` and ``s``.
    """
    d = np.asarray(u, dtype=float) - view.q
    plus = np.clip(d, 0.0, None)
    minus = np.clip(-d, 0.0, None)
    zeta = max(rho - plus.sum(), 0.0)
    alpha = zeta * view.p
    return Strategy(plus + alpha, minus + alpha)


def solve(
    view: CanonicalView,
    rho: float,
    sigma: float,
    interior_policy: InteriorPolicy | str = InteriorPolicy.EXACT_BUDGET,
) -> Solution:
    """Optimal strategies minimizing D(t || p) under budgets ``rho``, ``sigma``.

    Inside the critical region the optimum (t = p) is not unique:
    ``EXACT_BUDGET`` spends both budgets exactly with padding proportional to
    ``p``; ``ECONOMICAL`` returns the boundary solution at ``rho_crit(sigma)``
    and reports the unused forgery budget.
    """
    policy = InteriorPolicy(interior_policy)
    table = thresholds(view)
    region = classify(table, rho, sigma)

    unused = 0.0
    if region.kind is Region.CRITICAL_INTERIOR:
        if policy is InteriorPolicy.EXACT_BUDGET:
            strat = pad_strategy(view, view.p * (1.0 + rho - sigma), rho, sigma)
        else:
            strat = _closed_form(view, region.j - 1, region.j, region.rho_crit, sigma)
            unused = rho - region.rho_crit
        i, j = region.j - 1, region.j
    else:
        i, j = region.i, region.j
        strat = _closed_form(view, i, j, rho, sigma)

    t = apparent_profile(view, strat)
    risk = kl_divergence(t.mass, view.p)
    q_red, p_red = reduced_profiles(view, i, j)
    if region.kind is Region.CRITICAL_INTERIOR:
        risk_red, phi, chi = 0.0, 1.0, 1.0
    else:
        rsum = q_red.copy()
        rsum[0] += rho if i >= 1 else 0.0
        rsum[-1] -= sigma
        risk_red = kl_divergence(rsum / (1.0 + rho - sigma), p_red)
        phi, chi = proportionality(view, region, rho, sigma)
    return Solution(
        rho=rho,
        sigma=sigma,
        strategy=strat,
        t=t,
        risk=risk,
        risk_reduced=risk_red,
        region=region,
        phi=phi,
        chi=chi,
        reduced_q=q_red,
        reduced_p=p_red,
        policy=policy,
        unused_forgery=unused,
        degenerate=view.degenerate,
    )


def risk_surface(view: CanonicalView, rhos, sigmas) -> np.ndarray:
    """Minimum risk on the grid ``rhos x sigmas`` (rows follow ``rhos``).

    Evaluates the reduced-distribution expression directly, without building
    strategies, so whole populations can be swept quickly.
    """
    rhos = np.asarray(rhos, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if np.any(rhos < 0) or np.any(~np.isfinite(rhos)):
        raise RateOutOfRange("forgery rates must be finite and >= 0")
    if np.any(sigmas < 0) or np.any(sigmas >= 1):
        raise RateOutOfRange("suppression rates must lie in [0, 1)")
    table = thresholds(view)
    R, S = np.meshgrid(rhos, sigmas, indexing="ij")
    j = suppression_index(table, S)
    rc = _critical_from_j(table, S, j)
    critical = R >= rc - BOUNDARY_TOL
    jj = np.maximum(j, 2)
    i = np.maximum(forgery_index(table, R, jj), 1)
    M = 1.0 + R - S
    log2 = np.log2
    head_mass = view.Q[i - 1] + R
    tail_mass = view.Qbar[jj - 1] - S
    with np.errstate(divide="ignore", invalid="ignore"):
        head = head_mass / M * log2(head_mass / (M * view.P[i - 1]))
        tail = np.where(tail_mass > 0, tail_mass / M * log2(tail_mass / (M * view.Pbar[jj - 1])), 0.0)
    # middle categories i+1..j-1 are only rescaled by 1/M
    lq = view.q * np.log2(view.ratios)
    S_cum = np.concatenate([[0.0], np.cumsum(lq)])
    Q_cum = np.concatenate([[0.0], view.Q])
    mid_lq = S_cum[jj - 1] - S_cum[i]
    mid_q = Q_cum[jj - 1] - Q_cum[i]
    middle = (mid_lq - mid_q * log2(M)) / M
    out = np.where(critical, 0.0, head + middle + tail)
    return np.maximum(out, 0.0)


@dataclass(frozen=True)
class KktCertificate:
    psi: float
    omega: float
    g: np.ndarray
    max_violation: float
    valid: bool


def kkt_certificate(view: CanonicalView, strat: Strategy, tol: float = 1e-8) -> KktCertificate:
    """Check the optimality conditions of a candidate strategy.

    Works with ``g_k = log2(t_k / p_k)``, a strictly increasing transform of
    the marginal cost of forging in category ``k``. Optimality requires a
    common level ``psi`` on forged categories, a common level ``omega`` on
    suppressed ones, ``psi <= g_k <= omega`` everywhere, and ``psi <= omega``.
    """
    check_strategy(view, strat)
    t = apparent_profile(view, strat).mass
    with np.errstate(divide="ignore"):
        g = np.log2(t / view.p)
    forged = strat.r > tol
    suppressed = strat.s > tol
    psi = float(g[forged].max()) if forged.any() else float(g.min())
    omega = float(g[suppressed].min()) if suppressed.any() else float(g.max())

    violations = [0.0]
    if forged.any():
        violations.append(float(g[forged].max() - g[forged].min()))
    if suppressed.any():
        violations.append(float(g[suppressed].max() - g[suppressed].min()))
    violations.append(float(np.max(psi - g)))
    violations.append(float(np.max(g - omega)))
    violations.append(psi - omega)
    worst = max(violations)
    if math.isnan(worst):
        worst = math.inf
    return KktCertificate(psi=psi, omega=omega, g=g, max_violation=worst, valid=bool(worst <= tol))
