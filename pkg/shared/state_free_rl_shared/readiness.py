from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Callable

from state_free_rl_shared.enums import (
    DependencyStatus,
    ReadinessState,
    ServiceName,
)
from state_free_rl_shared.schemas import ReadinessCheck, ReadinessResponse
from state_free_rl_shared.time import utc_now

ENVIRONMENT_VAR = "SF_RL_ENV"
OUTPUT_DIR_VAR = "SF_RL_OUTPUT_DIR"
LOCAL_ENVIRONMENTS = {"local", "development", "test"}
PRODUCTION_ENVIRONMENT = "production"
VALID_ENVIRONMENTS = LOCAL_ENVIRONMENTS | {PRODUCTION_ENVIRONMENT}
logger = logging.getLogger(__name__)


DependencyChecker = Callable[[Mapping[str, str]], ReadinessCheck]


def build_readiness_response(
    *,
    service: ServiceName,
    environ: Mapping[str, str] | None = None,
    results_checker: DependencyChecker | None = None,
    additional_checks: Mapping[str, ReadinessCheck] | None = None,
) -> ReadinessResponse:
    env = os.environ if environ is None else environ
    checker = check_results_directory if results_checker is None else results_checker

    checks = {
        "configuration": check_configuration(environ=env),
        "results_directory": checker(env),
    }
    checks.update(additional_checks or {})
    status = (
        ReadinessState.READY
        if all(check.status != DependencyStatus.FAIL for check in checks.values())
        else ReadinessState.NOT_READY
    )
    return ReadinessResponse(
        status=status,
        service=service,
        checks=checks,
        time=utc_now(),
    )


def readiness_http_status(readiness: ReadinessResponse) -> int:
    return 200 if readiness.status == ReadinessState.READY else 503


def check_configuration(*, environ: Mapping[str, str]) -> ReadinessCheck:
    environment = environ.get(ENVIRONMENT_VAR, "").strip().lower()
    if environment not in VALID_ENVIRONMENTS:
        return ReadinessCheck(
            status=DependencyStatus.FAIL,
            message=(
                f"{ENVIRONMENT_VAR} must be one of "
                f"{', '.join(sorted(VALID_ENVIRONMENTS))}."
            ),
        )

    if not environ.get(OUTPUT_DIR_VAR, "").strip():
        return ReadinessCheck(
            status=DependencyStatus.FAIL,
            message=f"Missing required configuration: {OUTPUT_DIR_VAR}.",
        )

    return ReadinessCheck(status=DependencyStatus.OK)


def check_results_directory(environ: Mapping[str, str]) -> ReadinessCheck:
    raw = environ.get(OUTPUT_DIR_VAR, "").strip()
    if not raw:
        return ReadinessCheck(
            status=DependencyStatus.FAIL,
            message=f"Missing required configuration: {OUTPUT_DIR_VAR}.",
        )

    directory = Path(raw)
    try:
        if not directory.is_dir():
            return ReadinessCheck(
                status=DependencyStatus.FAIL,
                message=f"{OUTPUT_DIR_VAR} does not name an existing directory.",
            )
        has_runs = any(directory.glob("*.json"))
    except OSError as exc:
        logger.exception("Results directory readiness check failed.")
        message = "Results directory readiness check failed."
        if environ.get(ENVIRONMENT_VAR, "").strip().lower() in LOCAL_ENVIRONMENTS:
            message = f"{message} {exc}"
        return ReadinessCheck(status=DependencyStatus.FAIL, message=message)

    if not has_runs:
        return ReadinessCheck(
            status=DependencyStatus.DEGRADED,
            message="Results directory holds no run summaries yet.",
        )
    return ReadinessCheck(status=DependencyStatus.OK)
