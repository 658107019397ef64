from __future__ import annotations

import os
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from state_free_rl_shared.readiness import ENVIRONMENT_VAR, OUTPUT_DIR_VAR

from .errors import RuntimeConfigurationError

WORKERS_VAR = "SF_RL_WORKERS"
LOG_LEVEL_VAR = "SF_RL_LOG_LEVEL"
DEFAULT_ENVIRONMENT = "local"
DEFAULT_OUTPUT_DIR = "results"
DEFAULT_WORKERS = 1
DEFAULT_LOG_LEVEL = "INFO"
LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


@dataclass(frozen=True)
class HarnessSettings:
    environment: str
    output_dir: Path
    workers: int
    log_level: str

    @classmethod
    def from_env(
        cls,
        environ: Mapping[str, str] | None = None,
    ) -> HarnessSettings:
        env = os.environ if environ is None else environ
        return cls(
            environment=env.get(ENVIRONMENT_VAR, "").strip().lower() or DEFAULT_ENVIRONMENT,
            output_dir=Path(env.get(OUTPUT_DIR_VAR, "").strip() or DEFAULT_OUTPUT_DIR),
            workers=_positive_int(env, WORKERS_VAR, DEFAULT_WORKERS),
            log_level=env.get(LOG_LEVEL_VAR, "").strip().upper() or DEFAULT_LOG_LEVEL,
        )


def _positive_int(env: Mapping[str, str], name: str, default: int) -> int:
    raw = env.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise RuntimeConfigurationError(
            message=f"{name} must be a positive integer.",
            details={"variable": name, "value": raw},
        ) from exc
    if value < 1:
        raise RuntimeConfigurationError(
            message=f"{name} must be a positive integer.",
            details={"variable": name, "value": raw},
        )
    return value
