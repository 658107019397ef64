from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from state_free_rl_shared import CheckpointRow, RunStatus, RunSummary

CHECKPOINT_COLUMNS = (
    "episode",
    "cum_realized_loss",
    "cum_expected_regret",
    "cum_realized_regret",
    "pruned_size",
    "restarts",
)
AGGREGATE_COLUMNS = (
    "run_id",
    "environment",
    "algorithm",
    "seed",
    "status",
    "episodes",
    "final_expected_regret",
    "final_realized_regret",
    "restarts",
    "pruned_size",
    "error",
)
AGGREGATE_FILE = "aggregate.csv"


@dataclass(frozen=True)
class RunResult:
    """Outcome of one grid cell; ``summary`` is absent when the run failed."""

    run_id: str
    environment: str
    algorithm: str
    seed: int
    status: RunStatus
    summary: RunSummary | None = None
    error: str | None = None


def series_path(output_dir: Path, run_id: str) -> Path:
    return output_dir / f"{run_id}.csv"


def summary_path(output_dir: Path, run_id: str) -> Path:
    return output_dir / f"{run_id}.json"


def write_checkpoint_csv(path: Path, rows: Iterable[CheckpointRow]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CHECKPOINT_COLUMNS)
        for row in rows:
            writer.writerow([_cell(getattr(row, column)) for column in CHECKPOINT_COLUMNS])


def read_checkpoint_csv(path: Path) -> list[CheckpointRow]:
    with path.open(encoding="utf-8", newline="") as handle:
        return [CheckpointRow.model_validate(record) for record in csv.DictReader(handle)]


def write_summary_json(path: Path, summary: RunSummary) -> None:
    path.write_text(
        json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_summary_json(path: Path) -> RunSummary:
    return RunSummary.model_validate_json(path.read_text(encoding="utf-8"))


def write_aggregate_csv(path: Path, results: Sequence[RunResult]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(AGGREGATE_COLUMNS)
        for result in sorted(results, key=lambda item: item.run_id):
            summary = result.summary
            writer.writerow(
                [
                    result.run_id,
                    result.environment,
                    result.algorithm,
                    result.seed,
                    result.status.value,
                    summary.episodes if summary else "",
                    _cell(summary.final_expected_regret) if summary else "",
                    _cell(summary.final_realized_regret) if summary else "",
                    summary.restarts if summary else "",
                    summary.pruned_size if summary else "",
                    result.error or "",
                ]
            )


def _cell(value: object) -> object:
    return repr(float(value)) if isinstance(value, float) else value
