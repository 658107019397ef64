from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from state_free_rl_shared import (
    CheckpointRow,
    PrunedSpaceSnapshot,
    RestartEventRecord,
    RunStatus,
    RunSummary,
    SfRlConfig,
    StateRef,
)
from state_free_rl_shared.time import utc_now

from sf_rl_core.mdp import State


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    realized_loss: float
    expected_loss: float
    pruned_realized_loss: float
    pruned_size: int
    restarts: int
    admitted: tuple[State, ...] = ()


@dataclass(frozen=True)
class RestartEvent:
    episode: int
    admitted_states: tuple[State, ...]
    pruned_size: int
    learner_delta: float


@dataclass
class RunLog:
    config: SfRlConfig
    records: list[EpisodeRecord] = field(default_factory=list)
    restart_events: list[RestartEvent] = field(default_factory=list)
    comparator_losses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    space_versions: list[PrunedSpaceSnapshot] = field(default_factory=list)
    unadmitted_visits: dict[State, int] = field(default_factory=dict)
    confidence_diagnostics: dict[str, int] = field(default_factory=dict)
    pruned_size: int = 0

    @property
    def episodes(self) -> int:
        return len(self.records)

    @property
    def restarts(self) -> int:
        return len(self.restart_events)

    def admitted_states(self) -> list[State]:
        return [state for event in self.restart_events for state in event.admitted_states]

    def cumulative_realized_loss(self) -> np.ndarray:
        return np.cumsum([record.realized_loss for record in self.records])

    def cumulative_expected_regret(self) -> np.ndarray:
        expected = np.array([record.expected_loss for record in self.records])
        return np.cumsum(expected - self.comparator_losses[: len(expected)])

    def cumulative_realized_regret(self) -> np.ndarray:
        realized = np.array([record.realized_loss for record in self.records])
        return np.cumsum(realized - self.comparator_losses[: len(realized)])


def dyadic_checkpoints(episodes: int) -> list[int]:
    if episodes < 1:
        return []
    points = []
    value = 1
    while value < episodes:
        points.append(value)
        value *= 2
    points.append(episodes)
    return points


def checkpoint_rows(run_log: RunLog, checkpoints: Sequence[int] | None = None) -> list[CheckpointRow]:
    """Rows at the requested episodes (dyadic plus the last by default)."""
    episodes = run_log.episodes
    points = dyadic_checkpoints(episodes) if checkpoints is None else sorted(
        {point for point in checkpoints if 1 <= point <= episodes} | ({episodes} if episodes else set())
    )
    if not points:
        return []
    losses = run_log.cumulative_realized_loss()
    expected = run_log.cumulative_expected_regret()
    realized = run_log.cumulative_realized_regret()
    rows = []
    for point in points:
        record = run_log.records[point - 1]
        rows.append(
            CheckpointRow(
                episode=point,
                cum_realized_loss=float(losses[point - 1]),
                cum_expected_regret=float(expected[point - 1]),
                cum_realized_regret=float(realized[point - 1]),
                pruned_size=record.pruned_size,
                restarts=record.restarts,
            )
        )
    return rows


def summarize(
    run_log: RunLog,
    *,
    run_id: str,
    environment: str,
    algorithm: str,
    seed: int,
) -> RunSummary:
    episodes = run_log.episodes
    expected = run_log.cumulative_expected_regret()
    realized = run_log.cumulative_realized_regret()
    losses = run_log.cumulative_realized_loss()
    return RunSummary(
        run_id=run_id,
        environment=environment,
        algorithm=algorithm,
        seed=seed,
        status=RunStatus.SUCCEEDED,
        config=run_log.config,
        episodes=episodes,
        final_expected_regret=float(expected[-1]) if episodes else 0.0,
        final_realized_regret=float(realized[-1]) if episodes else 0.0,
        cumulative_realized_loss=float(losses[-1]) if episodes else 0.0,
        comparator_loss=float(run_log.comparator_losses.sum()),
        restarts=run_log.restarts,
        pruned_size=run_log.pruned_size,
        admitted_states=[
            StateRef(layer=layer, index=index) for layer, index in run_log.admitted_states()
        ],
        restart_timeline=[
            RestartEventRecord(
                episode=event.episode,
                admitted_states=[
                    StateRef(layer=layer, index=index) for layer, index in event.admitted_states
                ],
                pruned_size=event.pruned_size,
                learner_delta=event.learner_delta,
            )
            for event in run_log.restart_events
        ],
        pruned_space_versions=list(run_log.space_versions),
        confidence_diagnostics=dict(run_log.confidence_diagnostics),
        created_at=utc_now(),
    )
