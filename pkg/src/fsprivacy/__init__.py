"""Optimal forgery and suppression of ratings for privacy-preserving profiles.

A user's rating histogram ``q`` is perturbed by forging ratings (``r``, total
``rho``) and suppressing ratings (``s``, total ``sigma``) so that the apparent
profile ``t = (q + r - s) / (1 + rho - sigma)`` is as close as possible, in
KL divergence, to a population profile ``p``.
"""
from .analysis import LowRateReport, PureStrategyReport, low_rate_report, pure_strategy_report, taylor_risk
from .errors import (
    FSPrivacyError,
    DimensionMismatch,
    PositivityViolation,
    SupportViolation,
    InvariantViolation,
    RateOutOfRange,
    DegenerateInput,
    RegionError,
    FeasibilityViolation,
    DimensionTooLarge,
    InfeasibleU,
    NonConvergence,
    DataError,
    MalformedLine,
    UnknownGenre,
    UnknownMovie,
    PopulationDegenerate,
    EmptyPopulation,
    UserNotFound,
    SelfCheckFailed,
)
from .oracle import OracleResult, oracle_descent, oracle_grid, reconstruct_strategy
from .profile import CanonicalView, Pmf, Strategy, apparent_profile, canonicalize, check_strategy, kl_divergence
from .solver import (
    InteriorPolicy,
    KktCertificate,
    Region,
    RegionClass,
    Solution,
    ThresholdTable,
    classify,
    critical_rho,
    kkt_certificate,
    proportionality,
    reduced_profiles,
    risk_surface,
    solve,
    thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "CanonicalView",
    "DataError",
    "DegenerateInput",
    "DimensionMismatch",
    "DimensionTooLarge",
    "EmptyPopulation",
    "FSPrivacyError",
    "FeasibilityViolation",
    "InfeasibleU",
    "InteriorPolicy",
    "InvariantViolation",
    "KktCertificate",
    "LowRateReport",
    "MalformedLine",
    "NonConvergence",
    "OracleResult",
    "Pmf",
    "PopulationDegenerate",
    "PositivityViolation",
    "PureStrategyReport",
    "RateOutOfRange",
    "Region",
    "RegionClass",
    "RegionError",
    "SelfCheckFailed",
    "Solution",
    "Strategy",
    "SupportViolation",
    "ThresholdTable",
    "UnknownGenre",
    "UnknownMovie",
    "UserNotFound",
    "apparent_profile",
    "canonicalize",
    "check_strategy",
    "classify",
    "critical_rho",
    "kkt_certificate",
    "kl_divergence",
    "low_rate_report",
    "oracle_descent",
    "oracle_grid",
    "proportionality",
    "pure_strategy_report",
    "reconstruct_strategy",
    "reduced_profiles",
    "risk_surface",
    "solve",
    "taylor_risk",
    "thresholds",
]
