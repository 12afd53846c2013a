"""Behaviour of the optimal risk near the origin and the pure-strategy rules."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateInput
from .profile import CanonicalView, kl_divergence

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class LowRateReport:
    divergence: float
    grad_rho: float
    grad_sigma: float
    delta_rho: float
    delta_sigma: float


@dataclass(frozen=True)
class PureStrategyReport:
    rho_crit_pure: float
    sigma_crit_pure: float
    prefer_forgery_for_critical: bool
    prefer_forgery_low_rate: bool
    arith_mean: float
    geom_mean: float
    exp_divergence: float


def _divergence(view: CanonicalView) -> float:
    d = kl_divergence(view.q, view.p)
    if d <= DEGENERATE_TOL:
        raise DegenerateInput("q and p coincide; the low-rate factors are undefined")
    return d


def low_rate_report(view: CanonicalView) -> LowRateReport:
    """Gradient of the optimal risk at the origin and the relative decrement factors.

    Only the extreme ratios matter: forging the first canonical category and
    suppressing the last. Ties in the extreme ratios give the same numbers.
    """
    d = _divergence(view)
    lo = math.log2(view.ratios[0])
    hi = math.log2(view.ratios[-1])
    return LowRateReport(
        divergence=d,
        grad_rho=lo - d,
        grad_sigma=d - hi,
        delta_rho=1.0 - lo / d,
        delta_sigma=hi / d - 1.0,
    )


def taylor_risk(view: CanonicalView, rho: float, sigma: float) -> float:
    """First-order model ``D * (1 - delta_rho * rho - delta_sigma * sigma)``, floored at 0."""
    rep = low_rate_report(view)
    if rho == 0 and sigma == 0:
        return rep.divergence
    return max(rep.divergence * (1.0 - rep.delta_rho * rho - rep.delta_sigma * sigma), 0.0)


def pure_strategy_report(view: CanonicalView) -> PureStrategyReport:
    d = _divergence(view)
    x1 = float(view.ratios[0])
    xn = float(view.ratios[-1])
    rho_n = xn - 1.0
    sigma_1 = 1.0 - x1
    geom = math.sqrt(x1 * xn)
    exp_d = 2.0**d
    return PureStrategyReport(
        rho_crit_pure=rho_n,
        sigma_crit_pure=sigma_1,
        prefer_forgery_for_critical=rho_n < sigma_1,
        prefer_forgery_low_rate=geom < exp_d,
        arith_mean=0.5 * (x1 + xn),
        geom_mean=geom,
        exp_divergence=exp_d,
    )
