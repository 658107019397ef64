from __future__ import annotations

from datetime import datetime
from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, model_validator

from state_free_rl_shared.enums import (
    AdversarialScheduleKind,
    CheckStatus,
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

Probability = Annotated[float, Field(ge=0.0, le=1.0)]
RunName = Annotated[str, Field(pattern=r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,63}$")]
RunId = Annotated[str, Field(pattern=r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,200}$")]


class ContractModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(ContractModel):
    status: ServiceStatus
    service: ServiceName
    time: datetime


class ReadinessCheck(ContractModel):
    status: DependencyStatus
    message: str | None = None


class ReadinessResponse(ContractModel):
    status: ReadinessState
    service: ServiceName
    checks: dict[str, ReadinessCheck]
    time: datetime


class ErrorDetail(ContractModel):
    code: ErrorCode
    message: str
    details: dict[str, object] | None = None


class ErrorResponse(ContractModel):
    error: ErrorDetail


class SfRlConfig(ContractModel):
    delta: float = Field(gt=0.0, lt=1.0)
    epsilon: float = Field(default=0.0, ge=0.0)
    episodes: int = Field(ge=0)
    learner: LearnerName = LearnerName.UCBVI
    mode: RunMode = RunMode.SF_RL
    injection: InjectionMode = InjectionMode.OFF
    threshold_constant: float = Field(default=0.5, ge=0.0)
    bonus_constant: float = Field(default=1.0, gt=0.0)
    reset_confidence_on_restart: bool = False

    @model_validator(mode="after")
    def require_injectable_learner(self) -> SfRlConfig:
        if self.injection == InjectionMode.IMPROVED_SET:
            if self.learner != LearnerName.UOB_REPS:
                raise ValueError(
                    "injection improved-set requires the uob-reps learner"
                )
            if self.mode != RunMode.SF_RL:
                raise ValueError("injection improved-set requires sf-rl mode")
        return self


# Loss tables in files cover layers 1..H: layer -> state -> action.
LayerLossTable = list[list[list[Probability]]]


class ScheduleBlock(ContractModel):
    kind: AdversarialScheduleKind
    period: int | None = Field(default=None, ge=1)
    episodes: int | None = Field(default=None, ge=1)
    tables: list[LayerLossTable] | None = None
    path: str | None = None

    @model_validator(mode="after")
    def require_kind_fields(self) -> ScheduleBlock:
        if self.kind == AdversarialScheduleKind.PHASED:
            if not self.tables or self.period is None or self.episodes is None:
                raise ValueError("phased schedules require tables, period and episodes")
        elif not self.path:
            raise ValueError("file schedules require path")
        return self


class LossBlock(ContractModel):
    kind: LossKind
    means: LayerLossTable | None = None
    schedule: ScheduleBlock | None = None

    @model_validator(mode="after")
    def require_kind_fields(self) -> LossBlock:
        if self.kind == LossKind.STOCHASTIC and self.means is None:
            raise ValueError("stochastic losses require means")
        if self.kind == LossKind.ADVERSARIAL and self.schedule is None:
            raise ValueError("adversarial losses require schedule")
        return self


class ExplicitEnvironmentFile(ContractModel):
    kind: EnvironmentKind = EnvironmentKind.EXPLICIT
    name: RunName
    horizon: int = Field(ge=1)
    layer_sizes: list[int] = Field(min_length=3)
    actions: int = Field(ge=1)
    # layer h = 0..H -> state -> action -> probabilities over layer h + 1
    transitions: list[list[list[list[float]]]]
    losses: LossBlock

    @model_validator(mode="after")
    def require_layer_shapes(self) -> ExplicitEnvironmentFile:
        if len(self.layer_sizes) != self.horizon + 2:
            raise ValueError("layer_sizes must list horizon + 2 layers")
        if self.layer_sizes[0] != 1 or self.layer_sizes[-1] != 1:
            raise ValueError("the start and terminal layers hold exactly one state")
        if len(self.transitions) != self.horizon + 1:
            raise ValueError("transitions must list horizon + 1 layers")
        return self


class FamilyLossSpec(ContractModel):
    kind: LossKind = LossKind.STOCHASTIC
    mean_low: Probability = 0.0
    mean_high: Probability = 1.0
    phases: int = Field(default=4, ge=1)
    period: int = Field(default=100, ge=1)
    episodes: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def require_ordered_means(self) -> FamilyLossSpec:
        if self.mean_low > self.mean_high:
            raise ValueError("mean_low must not exceed mean_high")
        if self.kind == LossKind.ADVERSARIAL and self.episodes is None:
            raise ValueError("adversarial families require episodes")
        return self


class EnvFamilySpec(ContractModel):
    kind: EnvironmentKind = EnvironmentKind.FAMILY
    name: RunName
    horizon: int = Field(ge=1)
    reachable_states: list[Annotated[int, Field(ge=1)]]
    padded_states: list[Annotated[int, Field(ge=0)]] | None = None
    actions: int = Field(ge=1)
    transition_concentration: float = Field(default=1.0, gt=0.0)
    loss: FamilyLossSpec = Field(default_factory=FamilyLossSpec)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def require_layer_counts(self) -> EnvFamilySpec:
        if len(self.reachable_states) != self.horizon:
            raise ValueError("reachable_states must list one count per layer 1..H")
        if self.padded_states is not None and len(self.padded_states) != self.horizon:
            raise ValueError("padded_states must list one count per layer 1..H")
        return self

    def padding(self) -> list[int]:
        return list(self.padded_states or [0] * self.horizon)


class EnvironmentEntry(ContractModel):
    name: RunName
    path: str | None = None
    spec: EnvFamilySpec | None = None

    @model_validator(mode="after")
    def require_single_source(self) -> EnvironmentEntry:
        if (self.path is None) == (self.spec is None):
            raise ValueError("environment entries need exactly one of path or spec")
        return self


class AlgorithmEntry(ContractModel):
    name: RunName
    config: SfRlConfig


class ExperimentPlan(ContractModel):
    name: RunName
    output_dir: str = Field(min_length=1)
    workers: int = Field(default=1, ge=1)
    checkpoints: list[Annotated[int, Field(ge=1)]] | None = None
    environments: list[EnvironmentEntry] = Field(min_length=1)
    algorithms: list[AlgorithmEntry] = Field(min_length=1)
    seeds: list[Annotated[int, Field(ge=0)]] = Field(min_length=1)

    @model_validator(mode="after")
    def require_unique_grid_keys(self) -> ExperimentPlan:
        for label, values in (
            ("environment", [entry.name for entry in self.environments]),
            ("algorithm", [entry.name for entry in self.algorithms]),
            ("seed", self.seeds),
        ):
            duplicates = sorted({value for value in values if values.count(value) > 1})
            if duplicates:
                raise ValueError(f"duplicate {label} entries: {duplicates}")
        return self


class StateRef(ContractModel):
    layer: int = Field(ge=0)
    index: int = Field(ge=0)


class PrunedSpaceSnapshot(ContractModel):
    version: int = Field(ge=0)
    admitted: list[list[int]]
    size: int = Field(ge=0)


class RestartEventRecord(ContractModel):
    episode: int = Field(ge=1)
    admitted_states: list[StateRef]
    pruned_size: int = Field(ge=0)
    learner_delta: float = Field(gt=0.0)


class CheckpointRow(ContractModel):
    episode: int = Field(ge=1)
    cum_realized_loss: float
    cum_expected_regret: float
    cum_realized_regret: float
    pruned_size: int = Field(ge=0)
    restarts: int = Field(ge=0)


class RunSummary(ContractModel):
    run_id: RunId
    environment: str
    algorithm: str
    seed: int
    status: RunStatus
    config: SfRlConfig
    episodes: int = Field(ge=0)
    final_expected_regret: float
    final_realized_regret: float
    cumulative_realized_loss: float
    comparator_loss: float
    restarts: int = Field(ge=0)
    pruned_size: int = Field(ge=0)
    admitted_states: list[StateRef]
    restart_timeline: list[RestartEventRecord]
    pruned_space_versions: list[PrunedSpaceSnapshot]
    confidence_diagnostics: dict[str, int] = Field(default_factory=dict)
    created_at: datetime


class RunListItem(ContractModel):
    run_id: RunId
    environment: str
    algorithm: str
    seed: int
    final_expected_regret: float


class RunListResponse(ContractModel):
    runs: list[RunListItem]


class CheckpointSeriesResponse(ContractModel):
    run_id: RunId
    rows: list[CheckpointRow]


class ValidationCheck(ContractModel):
    name: str
    status: CheckStatus
    measured: float | None = None
    tolerance: float | None = None
    details: dict[str, object] = Field(default_factory=dict)


class ValidationReport(ContractModel):
    suite: ValidationSuite
    passed: bool
    seed: int
    trials: int | None = None
    checks: list[ValidationCheck]
    created_at: datetime


class ValidationRequest(ContractModel):
    suite: str = Field(min_length=1)
    trials: int | None = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
