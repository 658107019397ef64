from __future__ import annotations

import logging
import zipfile
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from state_free_rl_shared import (
    AdversarialScheduleKind,
    EnvFamilySpec,
    EnvironmentEntry,
    EnvironmentKind,
    ExperimentPlan,
    ExplicitEnvironmentFile,
    LossBlock,
    LossKind,
)

from sf_rl_core.errors import ConfigurationError
from sf_rl_core.losses import LossModel, PhasedLosses, StochasticLosses, load_schedule
from sf_rl_core.mdp import LayeredMdp, loss_table_from_layers
from sf_rl_core.occupancy import max_reach_probabilities

from .environments import GeneratedEnvironment, generate_env
from .errors import EnvironmentFileError, PlanConfigurationError

logger = logging.getLogger(__name__)


def read_document(path: str | Path) -> Any:
    """YAML or JSON document; JSON parses as YAML."""
    try:
        with Path(path).open(encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise EnvironmentFileError(
            message=f"Could not read {path}.",
            details={"path": str(path), "reason": str(exc)},
        ) from exc
    except yaml.YAMLError as exc:
        raise EnvironmentFileError(
            message=f"{path} is not valid YAML or JSON.",
            details={"path": str(path), "reason": str(exc)},
        ) from exc


def parse_environment(
    document: Any,
    *,
    source: str,
) -> ExplicitEnvironmentFile | EnvFamilySpec:
    if not isinstance(document, dict):
        raise EnvironmentFileError(
            message="Environment files must hold a mapping.",
            details={"path": source},
        )
    kind = document.get("kind", EnvironmentKind.EXPLICIT.value)
    try:
        if kind == EnvironmentKind.FAMILY.value:
            return EnvFamilySpec.model_validate(document)
        if kind == EnvironmentKind.EXPLICIT.value:
            return ExplicitEnvironmentFile.model_validate(document)
    except ValidationError as exc:
        raise EnvironmentFileError(
            message=f"Invalid environment file {source}.",
            details={"path": source, "errors": _validation_errors(exc)},
        ) from exc
    raise EnvironmentFileError(
        message=f"Unknown environment kind: {kind}.",
        details={"path": source, "kinds": [item.value for item in EnvironmentKind]},
    )


def load_environment(path: str | Path) -> GeneratedEnvironment:
    """Loads an explicit or family environment; relative schedule paths resolve next to the file."""
    path = Path(path)
    parsed = parse_environment(read_document(path), source=str(path))
    return build_environment(parsed, base_dir=path.parent)


def build_environment(
    parsed: ExplicitEnvironmentFile | EnvFamilySpec,
    *,
    base_dir: Path,
) -> GeneratedEnvironment:
    try:
        if isinstance(parsed, EnvFamilySpec):
            return generate_env(parsed)
        return _explicit_environment(parsed, base_dir=base_dir)
    except ConfigurationError as exc:
        raise EnvironmentFileError(
            message=str(exc),
            details={"environment": parsed.name},
        ) from exc


def resolve_entry(entry: EnvironmentEntry, *, base_dir: Path) -> GeneratedEnvironment:
    if entry.spec is not None:
        return build_environment(entry.spec, base_dir=base_dir)
    path = Path(entry.path)
    if not path.is_absolute():
        path = base_dir / path
    return load_environment(path)


def load_plan(path: str | Path) -> ExperimentPlan:
    try:
        document = read_document(path)
    except EnvironmentFileError as exc:
        raise PlanConfigurationError(message=exc.message, details=exc.details) from exc
    try:
        return ExperimentPlan.model_validate(document)
    except ValidationError as exc:
        raise PlanConfigurationError(
            message=f"Invalid experiment plan {path}.",
            details={"path": str(path), "errors": _validation_errors(exc)},
        ) from exc


def _explicit_environment(
    parsed: ExplicitEnvironmentFile,
    *,
    base_dir: Path,
) -> GeneratedEnvironment:
    mdp = LayeredMdp(
        layer_sizes=tuple(parsed.layer_sizes),
        n_actions=parsed.actions,
        transitions=tuple(parsed.transitions),
    )
    losses = _loss_model(parsed.losses, mdp, base_dir=base_dir)
    logger.debug("Loaded explicit environment %s with layers %s.", parsed.name, mdp.layer_sizes)
    return GeneratedEnvironment(
        name=parsed.name,
        mdp=mdp,
        losses=losses,
        reach=max_reach_probabilities(mdp),
    )


def _loss_model(block: LossBlock, mdp: LayeredMdp, *, base_dir: Path) -> LossModel:
    if block.kind == LossKind.STOCHASTIC:
        return StochasticLosses(loss_table_from_layers(mdp.layer_sizes, mdp.n_actions, block.means))
    schedule = block.schedule
    if schedule.kind == AdversarialScheduleKind.PHASED:
        return PhasedLosses(
            [loss_table_from_layers(mdp.layer_sizes, mdp.n_actions, table) for table in schedule.tables],
            period=schedule.period,
            episodes=schedule.episodes,
        )
    schedule_path = Path(schedule.path)
    if not schedule_path.is_absolute():
        schedule_path = base_dir / schedule_path
    try:
        losses = load_schedule(schedule_path, horizon=mdp.horizon)
    except ConfigurationError:
        raise
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise EnvironmentFileError(
            message=f"Could not read loss schedule {schedule_path}.",
            details={"path": str(schedule_path), "reason": str(exc)},
        ) from exc
    for layer, values in enumerate(losses.schedule):
        expected = (mdp.layer_sizes[layer], mdp.n_actions)
        if values.shape[1:] != expected:
            raise ConfigurationError(
                f"Loss schedule layer {layer} has shape {values.shape[1:]}, expected {expected}."
            )
    return losses


def _validation_errors(exc: ValidationError) -> list[dict[str, object]]:
    return [
        {
            "location": list(error.get("loc", ())),
            "message": str(error.get("msg", "Validation failed.")),
            "type": str(error.get("type", "value_error")),
        }
        for error in exc.errors()
    ]
