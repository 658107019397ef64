from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from pathlib import Path

from pydantic import ValidationError

from state_free_rl_shared import (
    CheckpointSeriesResponse,
    RunListItem,
    RunListResponse,
    RunSummary,
)
from state_free_rl_shared.readiness import OUTPUT_DIR_VAR

from .artifacts import read_checkpoint_csv, read_summary_json, series_path, summary_path

logger = logging.getLogger(__name__)


class ResultsUnavailable(RuntimeError):
    pass


class FileRunRepository:
    """Reads run summaries and checkpoint series written by the plan runner."""

    def __init__(self, *, results_dir: str | Path) -> None:
        self._results_dir = Path(results_dir) if str(results_dir).strip() else None

    @classmethod
    def from_env(
        cls,
        environ: Mapping[str, str] | None = None,
    ) -> FileRunRepository:
        env = os.environ if environ is None else environ
        return cls(results_dir=env.get(OUTPUT_DIR_VAR, "").strip())

    def list_runs(self) -> RunListResponse:
        directory = self._require_directory()
        runs = []
        for path in sorted(directory.glob("*.json")):
            try:
                summary = read_summary_json(path)
            except (OSError, ValidationError):
                logger.warning("Skipping unreadable run summary %s.", path.name)
                continue
            runs.append(
                RunListItem(
                    run_id=summary.run_id,
                    environment=summary.environment,
                    algorithm=summary.algorithm,
                    seed=summary.seed,
                    final_expected_regret=summary.final_expected_regret,
                )
            )
        return RunListResponse(runs=sorted(runs, key=lambda run: run.run_id))

    def get_summary(self, run_id: str) -> RunSummary | None:
        path = summary_path(self._require_directory(), run_id)
        if not path.is_file():
            return None
        try:
            return read_summary_json(path)
        except (OSError, ValidationError) as exc:
            logger.exception("Run summary %s could not be read.", run_id)
            raise ResultsUnavailable(f"Run summary {run_id} could not be read.") from exc

    def get_series(self, run_id: str) -> CheckpointSeriesResponse | None:
        path = series_path(self._require_directory(), run_id)
        if not path.is_file():
            return None
        try:
            rows = read_checkpoint_csv(path)
        except (OSError, ValidationError) as exc:
            logger.exception("Checkpoint series %s could not be read.", run_id)
            raise ResultsUnavailable(f"Checkpoint series {run_id} could not be read.") from exc
        return CheckpointSeriesResponse(run_id=run_id, rows=rows)

    def _require_directory(self) -> Path:
        if self._results_dir is None:
            raise ResultsUnavailable(f"Missing required configuration: {OUTPUT_DIR_VAR}.")
        if not self._results_dir.is_dir():
            raise ResultsUnavailable("Results directory is unavailable.")
        return self._results_dir
