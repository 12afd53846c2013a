"""Independent numerical minimizers used to validate the closed form.

Both work on the unnormalized apparent mass ``u = q + r - s``. A vector ``u``
is reachable by some feasible ``(r, s)`` with exact budgets iff ``u >= 0``,
``sum(u) = 1 + rho - sigma`` and ``sum((u - q)_+) <= rho``.

Neither minimizer uses thresholds, cells or any other part of the closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionTooLarge, InfeasibleU, NonConvergence, RateOutOfRange
from .profile import CanonicalView, Pmf, Strategy, kl_divergence

FEAS_TOL = 1e-9
MAX_GRID_DIM = 4


@dataclass(frozen=True)
class OracleResult:
    risk: float
    u: np.ndarray
    t: Pmf
    reconstructed: Strategy
    iterations: int
    kkt_residual: float
    converged: bool = True
    trace: tuple = ()  # objective after each accepted descent step (descent only)


def _check_rates(rho, sigma):
    if not (math.isfinite(rho) and rho >= 0):
        raise RateOutOfRange(f"forgery rate must be finite and >= 0, got {rho}")
    if not (math.isfinite(sigma) and 0 <= sigma < 1):
        raise RateOutOfRange(f"suppression rate must lie in [0, 1), got {sigma}")


def reconstruct_strategy(view: CanonicalView, u, rho: float, sigma: float) -> Strategy:
    """Recover a feasible ``(r, s)`` with ``q + r - s = u`` and exact budgets.

    ``r = (u - q)_+ + alpha``, ``s = (q - u)_+ + alpha`` with the padding
    ``alpha`` proportional to ``p`` and summing to ``rho - sum((u - q)_+)``.
    """
    u = np.asarray(u, dtype=float)
    total = 1.0 + rho - sigma
    if u.shape != view.q.shape:
        raise InfeasibleU(f"u has shape {u.shape}, expected {view.q.shape}")
    if np.any(u < -1e-12):
        raise InfeasibleU(f"u has a negative entry {u.min():.3g}")
    if abs(u.sum() - total) > FEAS_TOL:
        raise InfeasibleU(f"u sums to {u.sum()!r}, expected {total!r}")
    d = np.clip(u, 0.0, None) - view.q
    plus = np.clip(d, 0.0, None)
    excess = plus.sum() - rho
    if excess > FEAS_TOL:
        raise InfeasibleU(f"u needs {plus.sum()!r} forgery but only {rho!r} is available")
    alpha = max(-excess, 0.0) * view.p
    return Strategy(plus + alpha, np.clip(-d, 0.0, None) + alpha)


def _risk_rows(U: np.ndarray, total: float, p: np.ndarray) -> np.ndarray:
    # p*((1+y)log1p(y) - y) per term: nonnegative and accurate near t = p
    Y = U / (total * p) - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Y > -1.0, (1.0 + Y) * np.log1p(Y) - Y, 1.0)
    return (terms * p).sum(axis=1) / np.log(2.0)


@lru_cache(maxsize=64)
def _compositions(N: int, n: int) -> np.ndarray:
    """All nonnegative integer vectors of length n summing to N, lexicographic."""
    if n == 1:
        return np.array([[N]], dtype=np.int32)
    if n == 2:
        a = np.arange(N + 1, dtype=np.int32)
        return np.column_stack([a, N - a])
    blocks = []
    for a in range(N + 1):
        sub = _compositions(N - a, n - 1)
        blocks.append(np.column_stack([np.full(len(sub), a, dtype=np.int32), sub]))
    return np.vstack(blocks)


def _result(view, u, rho, sigma, iterations, residual, converged=True) -> OracleResult:
    strat = reconstruct_strategy(view, u, rho, sigma)
    total = 1.0 + rho - sigma
    t = Pmf(np.clip(u, 0.0, None) / total)
    return OracleResult(
        risk=kl_divergence(t.mass, view.p),
        u=u,
        t=t,
        reconstructed=strat,
        iterations=iterations,
        kkt_residual=residual,
        converged=converged,
    )


def _residual(view, u, r_active, s_active) -> float:
    with np.errstate(divide="ignore"):
        g = np.log2(u / view.p)
    gaps = [0.0]
    if r_active.any():
        gaps.append(g[r_active].max() - g.min())
    if s_active.any():
        gaps.append(g[u > 0].max() - g[s_active].min())
    return float(max(gaps))


def oracle_grid(view: CanonicalView, rho: float, sigma: float, resolution: float = 0.005) -> OracleResult:
    """Exhaustive search over a lattice of apparent masses ``u``.

    The lattice has spacing ``resolution * (1 + rho - sigma)`` along the
    simplex directions ``e_k - e_l`` and passes through ``(1 + rho - sigma) q``,
    which is always feasible, so the search never comes back empty. The
    returned risk is an upper bound on the true minimum.
    """
    n = view.n
    if n > MAX_GRID_DIM:
        raise DimensionTooLarge(f"grid oracle supports n <= {MAX_GRID_DIM}, got {n}")
    if not (0 < resolution <= 0.1):
        raise RateOutOfRange(f"resolution must lie in (0, 0.1], got {resolution}")
    _check_rates(rho, sigma)
    total = 1.0 + rho - sigma
    if rho == 0 and sigma == 0:
        u = view.q.copy()
        return _result(view, u, rho, sigma, 1, 0.0)

    h = resolution * total
    anchor = total * view.q
    base = np.floor(anchor / h + 1e-12)
    frac = anchor - base * h
    A = _compositions(int(base.sum()), n)
    U = frac + h * A
    feasible = np.clip(U - view.q, 0.0, None).sum(axis=1) <= rho + FEAS_TOL
    U = U[feasible]
    risks = _risk_rows(U, total, view.p)
    best = int(np.argmin(risks))  # first minimizer = lexicographically smallest u
    u = U[best].copy()
    u *= total / u.sum()
    return _result(view, u, rho, sigma, len(U), float("nan"))


def oracle_descent(
    view: CanonicalView,
    rho: float,
    sigma: float,
    max_iter: int = 200_000,
    tol: float = 1e-10,
) -> OracleResult:
    """Pairwise feasible-direction descent over ``(r, s)``.

    Each iteration moves forgery mass from the forged category with the
    largest ``g_k = log2(u_k / p_k)`` to the category with the smallest, or
    suppression mass from the suppressed category with the smallest ``g_k`` to
    the one with the largest. The step is the exact minimizer along that pair
    (ratios ``u/p`` equalized), clipped to feasibility and halved until the
    objective does not increase. Stops when the residual gap is below ``tol``.
    """
    _check_rates(rho, sigma)
    n = view.n
    p = view.p
    total = 1.0 + rho - sigma
    r = np.full(n, rho / n)
    s = sigma * view.q
    u = view.q + r - s

    def objective(u_):
        return float(_risk_rows(u_[None, :], total, p)[0])

    f = objective(u)
    trace = [f]
    # the stable objective is a sum of n nonnegative terms; its rounding error is
    # bounded by about n * eps * f, so smaller "increases" are noise
    noise = 4.0 * n * np.finfo(float).eps
    it = 0
    residual = _residual(view, u, r > 0, s > 0)
    while residual > tol and it < max_iter:
        it += 1
        with np.errstate(divide="ignore"):
            g = np.log2(u / p)
        moves = []
        if (r > 0).any():
            donor = int(np.flatnonzero(r > 0)[np.argmax(g[r > 0])])
            recv = int(np.argmin(g))
            moves.append((g[donor] - g[recv], "r", donor, recv))
        if (s > 0).any():
            live = np.flatnonzero(u > 0)
            recv = int(live[np.argmax(g[live])])
            donor = int(np.flatnonzero(s > 0)[np.argmin(g[s > 0])])
            moves.append((g[recv] - g[donor], "s", donor, recv))
        _, kind, a, b = max(moves)
        # equalizing u_a/p_a and u_b/p_b along the pair minimizes the objective
        if kind == "r":
            step = min((u[a] * p[b] - u[b] * p[a]) / (p[a] + p[b]), r[a])
        else:
            step = min((u[b] * p[a] - u[a] * p[b]) / (p[a] + p[b]), s[a], u[b])
        step = max(step, 0.0)
        improved = False
        while step > 0:
            r2, s2 = r.copy(), s.copy()
            if kind == "r":
                r2[a] -= step
                r2[b] += step
                if r2[a] < 1e-15:
                    r2[b] += r2[a]
                    r2[a] = 0.0
            else:
                s2[a] -= step
                s2[b] += step
                if s2[a] < 1e-15:
                    s2[b] += s2[a]
                    s2[a] = 0.0
            u2 = view.q + r2 - s2
            if np.all(u2 >= 0):
                f2 = objective(u2)
                if f2 <= f * (1.0 + noise):
                    r, s, u, f = r2, s2, u2, f2
                    trace.append(f)
                    improved = True
                    break
            step /= 2
            if step < 1e-300:
                break
        residual = _residual(view, u, r > 0, s > 0)
        if not improved:
            break

    result = OracleResult(
        risk=kl_divergence(u / total, p),
        u=u,
        t=Pmf(np.clip(u, 0.0, None) / total),
        reconstructed=Strategy(r, s),
        iterations=it,
        kkt_residual=residual,
        converged=residual <= tol,
        trace=tuple(trace),
    )
    if residual > tol:
        raise NonConvergence(
            f"descent stopped after {it} iterations with residual {residual:.3g} > {tol:.3g}", result
        )
    return result
