from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from state_free_rl_shared import AlgorithmEntry, ExperimentPlan, RunStatus

from sf_rl_core.driver import run_sf_rl
from sf_rl_core.learners import build_learner
from sf_rl_core.run_log import checkpoint_rows, summarize

from .artifacts import (
    AGGREGATE_FILE,
    RunResult,
    series_path,
    summary_path,
    write_aggregate_csv,
    write_checkpoint_csv,
    write_summary_json,
)
from .environments import GeneratedEnvironment
from .env_files import resolve_entry
from .errors import EnvironmentFileError, PlanConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RunTask:
    run_id: str
    environment_name: str
    environment: GeneratedEnvironment
    algorithm: AlgorithmEntry
    seed: int
    output_dir: Path
    checkpoints: tuple[int, ...] | None


def run_id_for(environment: str, algorithm: str, seed: int) -> str:
    return f"{environment}__{algorithm}__seed{seed}"


def build_tasks(
    plan: ExperimentPlan,
    *,
    base_dir: Path,
    output_dir: Path,
) -> list[RunTask]:
    environments: dict[str, GeneratedEnvironment] = {}
    for entry in plan.environments:
        try:
            environments[entry.name] = resolve_entry(entry, base_dir=base_dir)
        except EnvironmentFileError as exc:
            raise PlanConfigurationError(
                message=f"Environment {entry.name}: {exc.message}",
                details={"environment": entry.name, **exc.details},
            ) from exc

    checkpoints = tuple(plan.checkpoints) if plan.checkpoints else None
    tasks = [
        RunTask(
            run_id=run_id_for(environment, algorithm.name, seed),
            environment_name=environment,
            environment=environments[environment],
            algorithm=algorithm,
            seed=seed,
            output_dir=output_dir,
            checkpoints=checkpoints,
        )
        for environment in environments
        for algorithm in plan.algorithms
        for seed in plan.seeds
    ]
    run_ids = [task.run_id for task in tasks]
    if len(set(run_ids)) != len(run_ids):
        duplicates = sorted({run_id for run_id in run_ids if run_ids.count(run_id) > 1})
        raise PlanConfigurationError(
            message="Experiment plan produces duplicate run identifiers.",
            details={"run_ids": duplicates},
        )
    return tasks


def execute_run(task: RunTask) -> RunResult:
    """Runs one grid cell and writes its CSV and JSON; failures come back as results."""
    config = task.algorithm.config
    try:
        run_log = run_sf_rl(
            config,
            task.environment.mdp,
            task.environment.losses,
            build_learner(config),
            seed=task.seed,
        )
        summary = summarize(
            run_log,
            run_id=task.run_id,
            environment=task.environment_name,
            algorithm=task.algorithm.name,
            seed=task.seed,
        )
        write_checkpoint_csv(
            series_path(task.output_dir, task.run_id),
            checkpoint_rows(run_log, task.checkpoints),
        )
        write_summary_json(summary_path(task.output_dir, task.run_id), summary)
    except Exception as exc:
        logger.exception("Run %s failed.", task.run_id)
        return RunResult(
            run_id=task.run_id,
            environment=task.environment_name,
            algorithm=task.algorithm.name,
            seed=task.seed,
            status=RunStatus.FAILED,
            error=f"{type(exc).__name__}: {exc}",
        )

    logger.info(
        "Run %s finished: expected regret %.4f after %s episodes, %s restarts.",
        task.run_id,
        summary.final_expected_regret,
        summary.episodes,
        summary.restarts,
    )
    return RunResult(
        run_id=task.run_id,
        environment=task.environment_name,
        algorithm=task.algorithm.name,
        seed=task.seed,
        status=RunStatus.SUCCEEDED,
        summary=summary,
    )


def run_plan(
    plan: ExperimentPlan,
    *,
    base_dir: Path = Path("."),
    output_dir: Path | None = None,
    workers: int | None = None,
) -> list[RunResult]:
    """Executes the whole grid and writes the aggregate CSV; results are sorted by run id."""
    destination = Path(plan.output_dir) if output_dir is None else output_dir
    try:
        destination.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PlanConfigurationError(
            message=f"Output directory {destination} is not writable.",
            details={"output_dir": str(destination), "reason": str(exc)},
        ) from exc

    tasks = build_tasks(plan, base_dir=base_dir, output_dir=destination)
    pool_size = min(workers or plan.workers, len(tasks))
    logger.info("Plan %s: %s runs on %s worker(s).", plan.name, len(tasks), pool_size)

    if pool_size <= 1:
        results = [execute_run(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=pool_size) as executor:
            results = list(executor.map(execute_run, tasks))

    results.sort(key=lambda result: result.run_id)
    write_aggregate_csv(destination / AGGREGATE_FILE, results)
    failed = sum(result.status == RunStatus.FAILED for result in results)
    if failed:
        logger.warning("Plan %s: %s of %s runs failed.", plan.name, failed, len(results))
    return results
