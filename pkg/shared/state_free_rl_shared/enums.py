from __future__ import annotations

from enum import Enum


class ServiceName(str, Enum):
    RESULTS_SERVICE = "results-service"


class ServiceStatus(str, Enum):
    OK = "ok"


class ReadinessState(str, Enum):
    READY = "ready"
    NOT_READY = "not_ready"


class DependencyStatus(str, Enum):
    OK = "ok"
    DEGRADED = "degraded"
    FAIL = "fail"


class ErrorCode(str, Enum):
    NOT_FOUND = "NOT_FOUND"
    VALIDATION_ERROR = "VALIDATION_ERROR"
    INTERNAL_ERROR = "INTERNAL_ERROR"


class LossKind(str, Enum):
    STOCHASTIC = "stochastic"
    ADVERSARIAL = "adversarial"


class LearnerName(str, Enum):
    UCBVI = "ucbvi"
    UCBVI_ARRIVAL = "ucbvi-arrival"
    UOB_REPS = "uob-reps"


class RunMode(str, Enum):
    SF_RL = "sf-rl"
    # Learner on the full state space, no pruning or admissions.
    DIRECT = "direct"


class InjectionMode(str, Enum):
    OFF = "off"
    IMPROVED_SET = "improved-set"


class ConfidenceProvenance(str, Enum):
    BASELINE = "baseline"
    IMPROVED = "improved"


class EnvironmentKind(str, Enum):
    EXPLICIT = "explicit"
    FAMILY = "family"


class AdversarialScheduleKind(str, Enum):
    PHASED = "phased"
    FILE = "file"


class RunStatus(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class CheckStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"


class ValidationSuite(str, Enum):
    TRAJECTORY_EQUIVALENCE = "trajectory-equivalence"
    VALUE_GAP_SANDWICH = "value-gap-sandwich"
    ADMISSION_SOUNDNESS = "admission-soundness"
    CONFIDENCE_COVERAGE = "confidence-coverage"
    SUPERMARTINGALE_CONCENTRATION = "supermartingale-concentration"
    BANDIT_DEGENERATION = "bandit-degeneration"
    CONFIDENCE_WIDTH = "confidence-width"
    EXACT_INVARIANTS = "exact-invariants"
