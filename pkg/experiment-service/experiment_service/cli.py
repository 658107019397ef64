from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from state_free_rl_shared import (
    AlgorithmEntry,
    EnvironmentEntry,
    ExperimentPlan,
    InjectionMode,
    LearnerName,
    RunMode,
    RunStatus,
    SfRlConfig,
    ValidationSuite,
)

from .artifacts import RunResult
from .env_files import load_plan, parse_environment, read_document
from .errors import (
    EnvironmentFileError,
    PlanConfigurationError,
    RuntimeConfigurationError,
    UnknownSuiteError,
)
from .plan_runner import run_plan
from .settings import DEFAULT_WORKERS, LOG_FORMAT, HarnessSettings
from .validation import validate

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="experiment_service",
        description="Run state-free RL experiments and validation suites.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run one environment, learner and seed.")
    run.add_argument("--env", required=True, type=Path, help="Environment file (YAML or JSON).")
    run.add_argument(
        "--algo",
        required=True,
        choices=[learner.value for learner in LearnerName],
        help="Base learner.",
    )
    run.add_argument("--t", required=True, type=int, dest="episodes", help="Number of episodes T.")
    run.add_argument("--delta", required=True, type=float, help="Confidence level.")
    run.add_argument("--eps", type=float, default=0.0, dest="epsilon", help="Reachability threshold.")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, default=None, help="Output directory.")
    run.add_argument("--mode", choices=[mode.value for mode in RunMode], default=RunMode.SF_RL.value)
    run.add_argument(
        "--injection",
        choices=[mode.value for mode in InjectionMode],
        default=InjectionMode.OFF.value,
    )
    run.add_argument("--checkpoints", type=int, nargs="+", default=None)

    sweep = commands.add_parser("sweep", help="Run every cell of an experiment plan.")
    sweep.add_argument("--plan", required=True, type=Path, help="Plan file (YAML or JSON).")
    sweep.add_argument("--workers", type=int, default=None, help="Override the plan's worker count.")
    sweep.add_argument("--out", type=Path, default=None, help="Override the plan's output directory.")

    check = commands.add_parser("validate", help="Run a named validation suite.")
    check.add_argument("--suite", required=True, help=", ".join(suite.value for suite in ValidationSuite))
    check.add_argument("--trials", type=int, default=None)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--report", type=Path, default=None, help="Also write the report here.")
    return parser


def configure_logging(settings: HarnessSettings) -> None:
    logging.basicConfig(level=settings.log_level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = HarnessSettings.from_env()
    except RuntimeConfigurationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(settings)

    try:
        if args.command == "run":
            return _run(args, settings)
        if args.command == "sweep":
            return _sweep(args, settings)
        return _validate(args)
    except (PlanConfigurationError, EnvironmentFileError, UnknownSuiteError) as exc:
        logger.error("%s", exc.message)
        if exc.details:
            logger.error("Details: %s", json.dumps(exc.details, default=str))
        return EXIT_USAGE
    except ValidationError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_USAGE


def _run(args: argparse.Namespace, settings: HarnessSettings) -> int:
    environment = parse_environment(read_document(args.env), source=str(args.env))
    config = SfRlConfig(
        delta=args.delta,
        epsilon=args.epsilon,
        episodes=args.episodes,
        learner=LearnerName(args.algo),
        mode=RunMode(args.mode),
        injection=InjectionMode(args.injection),
    )
    output_dir = args.out or settings.output_dir
    plan = ExperimentPlan(
        name=f"{environment.name}-{args.algo}",
        output_dir=str(output_dir),
        checkpoints=args.checkpoints,
        environments=[EnvironmentEntry(name=environment.name, path=str(args.env.resolve()))],
        algorithms=[AlgorithmEntry(name=args.algo, config=config)],
        seeds=[args.seed],
    )
    return _report_results(run_plan(plan, output_dir=output_dir, workers=1))


def _sweep(args: argparse.Namespace, settings: HarnessSettings) -> int:
    plan = load_plan(args.plan)
    if args.workers is not None and args.workers < 1:
        raise PlanConfigurationError(
            message="--workers must be a positive integer.",
            details={"workers": args.workers},
        )
    workers = args.workers or (
        settings.workers if settings.workers != DEFAULT_WORKERS else plan.workers
    )
    output_dir = args.out
    if output_dir is None and not Path(plan.output_dir).is_absolute():
        output_dir = args.plan.parent / plan.output_dir
    results = run_plan(plan, base_dir=args.plan.parent, output_dir=output_dir, workers=workers)
    return _report_results(results)


def _validate(args: argparse.Namespace) -> int:
    if args.trials is not None and args.trials < 1:
        raise PlanConfigurationError(
            message="--trials must be a positive integer.",
            details={"trials": args.trials},
        )
    report = validate(args.suite, trials=args.trials, seed=args.seed)
    payload = json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True)
    if args.report is not None:
        args.report.write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return EXIT_OK if report.passed else EXIT_FAILED


def _report_results(results: Sequence[RunResult]) -> int:
    for result in results:
        if result.summary is not None:
            print(
                f"{result.run_id}\t{result.status.value}\t"
                f"expected_regret={result.summary.final_expected_regret:.6f}\t"
                f"restarts={result.summary.restarts}"
            )
        else:
            print(f"{result.run_id}\t{result.status.value}\t{result.error}")
    return EXIT_OK if all(result.status == RunStatus.SUCCEEDED for result in results) else EXIT_FAILED
