"""Shared contracts for the state-free RL experiment services."""

from state_free_rl_shared.enums import (
    AdversarialScheduleKind,
    CheckStatus,
    ConfidenceProvenance,
    DependencyStatus,
    EnvironmentKind,
    ErrorCode,
    InjectionMode,
    LearnerName,
    LossKind,
    ReadinessState,
    RunMode,
    RunStatus,
    ServiceName,
    ServiceStatus,
    ValidationSuite,
)
from state_free_rl_shared.schemas import (
    AlgorithmEntry,
    CheckpointRow,
    CheckpointSeriesResponse,
    ContractModel,
    EnvFamilySpec,
    EnvironmentEntry,
    ErrorDetail,
    ErrorResponse,
    ExperimentPlan,
    ExplicitEnvironmentFile,
    FamilyLossSpec,
    HealthResponse,
    LossBlock,
    PrunedSpaceSnapshot,
    ReadinessCheck,
    ReadinessResponse,
    RestartEventRecord,
    RunListItem,
    RunListResponse,
    RunSummary,
    ScheduleBlock,
    SfRlConfig,
    StateRef,
    ValidationCheck,
    ValidationReport,
    ValidationRequest,
)
from state_free_rl_shared.readiness import (
    build_readiness_response,
    check_configuration,
    check_results_directory,
    readiness_http_status,
)

__all__ = [
    "AdversarialScheduleKind",
    "AlgorithmEntry",
    "CheckStatus",
    "CheckpointRow",
    "CheckpointSeriesResponse",
    "ConfidenceProvenance",
    "ContractModel",
    "DependencyStatus",
    "EnvFamilySpec",
    "EnvironmentEntry",
    "EnvironmentKind",
    "ErrorCode",
    "ErrorDetail",
    "ErrorResponse",
    "ExperimentPlan",
    "ExplicitEnvironmentFile",
    "FamilyLossSpec",
    "HealthResponse",
    "InjectionMode",
    "LearnerName",
    "LossBlock",
    "LossKind",
    "PrunedSpaceSnapshot",
    "ReadinessCheck",
    "ReadinessResponse",
    "ReadinessState",
    "RestartEventRecord",
    "RunListItem",
    "RunListResponse",
    "RunMode",
    "RunStatus",
    "RunSummary",
    "ScheduleBlock",
    "ServiceName",
    "ServiceStatus",
    "SfRlConfig",
    "StateRef",
    "ValidationCheck",
    "ValidationReport",
    "ValidationRequest",
    "ValidationSuite",
    "build_readiness_response",
    "check_configuration",
    "check_results_directory",
    "readiness_http_status",
]
