"""Certificates, detectors and consequence checks for local eventual positivity."""
from ._core import (
    DETECTION_KINDS,
    VERDICTS,
    Bound,
    Certificate,
    DetectionResult,
    SpectralContext,
    f_panel,
    projection_lower_bound,
)
from .certificates import certify_individual, certify_uniform, eigen_hypotheses, predict_uniform_t0
from .consequences import (
    AsymptoticReport,
    Claim,
    ExtractionResult,
    LadderReport,
    SemigroupPositivityReport,
    check_asymptotic_resolvent,
    is_positive_semigroup,
    krein_rutman_extract,
    ladder_consequences,
    semigroup_positivity,
)
from .detectors import (
    default_time_grid,
    detect_resolvent_interval,
    detect_semigroup_t0,
    resolvent_ladder,
    resolvent_scan,
    semigroup_scan,
)
from .principles import AntiMaxResult, anti_maximum, maximum_principle

__all__ = [
    "DETECTION_KINDS",
    "VERDICTS",
    "AntiMaxResult",
    "AsymptoticReport",
    "Bound",
    "Certificate",
    "Claim",
    "DetectionResult",
    "ExtractionResult",
    "LadderReport",
    "SemigroupPositivityReport",
    "SpectralContext",
    "anti_maximum",
    "certify_individual",
    "certify_uniform",
    "check_asymptotic_resolvent",
    "default_time_grid",
    "detect_resolvent_interval",
    "detect_semigroup_t0",
    "eigen_hypotheses",
    "f_panel",
    "is_positive_semigroup",
    "krein_rutman_extract",
    "ladder_consequences",
    "maximum_principle",
    "predict_uniform_t0",
    "projection_lower_bound",
    "resolvent_ladder",
    "resolvent_scan",
    "semigroup_positivity",
    "semigroup_scan",
]
