"""Probability profiles, KL divergence and the canonical (ratio-sorted) ordering.

All divergences are measured in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    FeasibilityViolation,
    InvariantViolation,
    PositivityViolation,
    SupportViolation,
)

SUM_TOL = 1e-9
NORMALIZE_TOL = 1e-6
NEG_SLACK = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pmf:
    """A probability mass function over ``n >= 2`` categories.

    Inputs whose total deviates from 1 by at most 1e-6 are renormalized;
    larger deviations are rejected.
    """

    mass: np.ndarray

    def __post_init__(self):
        a = np.array(self.mass, dtype=float).ravel()
        if a.size < 2:
            raise DimensionMismatch(f"a profile needs at least 2 categories, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise InvariantViolation("profile contains non-finite entries")
        if np.any(a < -NEG_SLACK):
            raise InvariantViolation(f"negative probability {a.min():.3g}")
        a = np.clip(a, 0.0, None)
        total = a.sum()
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise InvariantViolation(f"probabilities sum to {total!r}, not 1")
        # renormalizing an already-normalized vector must not move any bits,
        # so sums within a few ulps of 1 are left alone
        if abs(total - 1.0) > 4 * a.size * np.finfo(float).eps:
            a = a / total
        object.__setattr__(self, "mass", _frozen(a))

    @property
    def n(self) -> int:
        return self.mass.size

    def __len__(self):
        return self.mass.size

    def __getitem__(self, k):
        return self.mass[k]

    def __array__(self, dtype=None, copy=None):
        return self.mass if dtype is None else self.mass.astype(dtype)

    def tolist(self) -> list[float]:
        return self.mass.tolist()


def as_pmf(x) -> Pmf:
    return x if isinstance(x, Pmf) else Pmf(x)


@dataclass(frozen=True)
class CanonicalView:
    """A profile pair re-indexed so that ``q[k] / p[k]`` is nondecreasing.

    ``perm[k]`` is the original index of canonical category ``k``. Cumulative
    sums follow the usual convention: ``Q[k] = q[0] + ... + q[k]`` and
    ``Qbar[k] = q[k] + ... + q[n-1]`` (same for ``P``/``Pbar``).
    """

    perm: np.ndarray
    q: np.ndarray
    p: np.ndarray
    ratios: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    Qbar: np.ndarray
    Pbar: np.ndarray
    degenerate: bool = field(default=False)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def inverse_perm(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def to_original(self, vec) -> np.ndarray:
        """Map a canonical-order vector back to the original category order."""
        vec = np.asarray(vec, dtype=float)
        out = np.empty_like(vec)
        out[self.perm] = vec
        return out

    def to_canonical(self, vec) -> np.ndarray:
        return np.asarray(vec, dtype=float)[self.perm]


def canonicalize(q, p) -> CanonicalView:
    q, p = as_pmf(q), as_pmf(p)
    if q.n != p.n:
        raise DimensionMismatch(f"q has {q.n} categories, p has {p.n}")
    bad = np.flatnonzero((q.mass <= 0) | (p.mass <= 0))
    if bad.size:
        raise PositivityViolation(
            f"profiles must be strictly positive; offending categories {bad.tolist()}", bad.tolist()
        )
    ratios = q.mass / p.mass
    perm = np.argsort(ratios, kind="stable")
    qc, pc = q.mass[perm], p.mass[perm]
    return CanonicalView(
        perm=_frozen(perm).astype(int),
        q=_frozen(qc),
        p=_frozen(pc),
        ratios=_frozen(ratios[perm]),
        Q=_frozen(np.cumsum(qc)),
        P=_frozen(np.cumsum(pc)),
        Qbar=_frozen(np.cumsum(qc[::-1])[::-1]),
        Pbar=_frozen(np.cumsum(pc[::-1])[::-1]),
        degenerate=bool(np.max(np.abs(qc - pc)) <= SUM_TOL),
    )


def kl_divergence(a, b) -> float:
    """D(a || b) in bits, with the convention 0 log 0 = 0.

    Each term is evaluated as ``b*((1+y)*log1p(y) - y)`` with ``y = a/b - 1``,
    which is nonnegative termwise and keeps full relative accuracy when
    ``a`` and ``b`` nearly coincide.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    if np.any((a > 0) & (b <= 0)):
        raise SupportViolation("a puts mass where b has none")
    if np.max(np.abs(a - b)) <= SUM_TOL:
        return 0.0
    pos = b > 0
    y = a[pos] / b[pos] - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        # y = -1 (a_k = 0) leaves only the -y term: 0 log 0 = 0
        terms = b[pos] * np.where(y > -1.0, (1.0 + y) * np.log1p(y), 0.0) - b[pos] * y
    return float(max(terms.sum() / np.log(2.0), 0.0))


@dataclass(frozen=True)
class Strategy:
    """Forgery mass ``r`` and suppression mass ``s`` per canonical category."""

    r: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).ravel()
        s = np.array(self.s, dtype=float).ravel()
        if r.shape != s.shape:
            raise DimensionMismatch("r and s must have the same length")
        if np.any(r < -NEG_SLACK) or np.any(s < -NEG_SLACK):
            raise FeasibilityViolation("strategies must be nonnegative")
        object.__setattr__(self, "r", _frozen(np.clip(r, 0.0, None)))
        object.__setattr__(self, "s", _frozen(np.clip(s, 0.0, None)))

    @property
    def rho(self) -> float:
        return float(self.r.sum())

    @property
    def sigma(self) -> float:
        return float(self.s.sum())

    @classmethod
    def zero(cls, n: int) -> "Strategy":
        return cls(np.zeros(n), np.zeros(n))


def check_strategy(view: CanonicalView, strat: Strategy) -> None:
    """Raise FeasibilityViolation unless ``strat`` is feasible against ``view``."""
    if strat.r.size != view.n:
        raise DimensionMismatch(f"strategy has {strat.r.size} categories, view has {view.n}")
    if strat.sigma >= 1.0:
        raise FeasibilityViolation(f"suppression rate {strat.sigma} must be below 1")
    slack = view.q + strat.r - strat.s
    if np.any(slack < -NEG_SLACK):
        k = int(np.argmin(slack))
        raise FeasibilityViolation(f"category {k} would end with negative mass {slack[k]:.3g}")


def apparent_profile(view: CanonicalView, strat: Strategy) -> Pmf:
    """The profile an observer sees: (q + r - s) / (1 + rho - sigma)."""
    u = view.q + strat.r - strat.s
    if np.any(u < -NEG_SLACK):
        raise InvariantViolation(f"apparent mass {u.min():.3g} is negative")
    total = 1.0 + strat.rho - strat.sigma
    if total <= 0:
        raise InvariantViolation("1 + rho - sigma must be positive")
    return Pmf(np.clip(u, 0.0, None) / total)
