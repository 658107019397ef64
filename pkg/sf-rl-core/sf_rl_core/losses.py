from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from state_free_rl_shared import LossKind

from sf_rl_core.errors import ConfigurationError, RunLengthError
from sf_rl_core.mdp import LossTable


class LossModel(ABC):
    """Per-episode loss tables over layers 0..H; layer 0 is always zero."""

    kind: LossKind

    @property
    @abstractmethod
    def episodes(self) -> int | None:
        """Schedule length, or ``None`` when unlimited."""

    @abstractmethod
    def _table(self, episode: int) -> LossTable: ...

    @abstractmethod
    def realize(
        self,
        *,
        episode: int,
        layer: int,
        state: int,
        action: int,
        rng: np.random.Generator,
    ) -> float: ...

    def table(self, episode: int) -> LossTable:
        """Mean loss table of a 1-based episode."""
        self.require_episode(episode)
        return self._table(episode)

    def require_episode(self, episode: int) -> None:
        if episode < 1:
            raise RunLengthError(f"Episodes are 1-based, got {episode}.")
        if self.episodes is not None and episode > self.episodes:
            raise RunLengthError(
                f"Loss schedule holds {self.episodes} episodes, episode {episode} requested."
            )

    def require_length(self, episodes: int) -> None:
        if self.episodes is not None and episodes > self.episodes:
            raise RunLengthError(
                f"Loss schedule holds {self.episodes} episodes, run needs {episodes}."
            )

    @abstractmethod
    def summed_table(self, episodes: int) -> LossTable:
        """Sum of the mean tables of episodes 1..``episodes``."""


def _checked_tables(tables: Sequence[np.ndarray], *, label: str) -> LossTable:
    checked = []
    for layer, values in enumerate(tables):
        array = np.array(values, dtype=float)
        if np.any(~np.isfinite(array)) or np.any(array < 0.0) or np.any(array > 1.0):
            raise ConfigurationError(f"{label} layer {layer} must lie in [0, 1].")
        if layer == 0 and np.any(array != 0.0):
            raise ConfigurationError(f"{label} start layer must be loss free.")
        array.setflags(write=False)
        checked.append(array)
    return tuple(checked)


class StochasticLosses(LossModel):
    """Bernoulli losses with fixed means."""

    kind = LossKind.STOCHASTIC

    def __init__(self, means: Sequence[np.ndarray]) -> None:
        self.means = _checked_tables(means, label="Loss means")

    @property
    def episodes(self) -> int | None:
        return None

    def _table(self, episode: int) -> LossTable:
        return self.means

    def realize(
        self,
        *,
        episode: int,
        layer: int,
        state: int,
        action: int,
        rng: np.random.Generator,
    ) -> float:
        return 1.0 if rng.random() < self.means[layer][state, action] else 0.0

    def summed_table(self, episodes: int) -> LossTable:
        return tuple(episodes * layer for layer in self.means)


class PhasedLosses(LossModel):
    """Oblivious adversary cycling through base tables, one per period."""

    kind = LossKind.ADVERSARIAL

    def __init__(
        self,
        tables: Sequence[Sequence[np.ndarray]],
        *,
        period: int,
        episodes: int,
    ) -> None:
        if not tables:
            raise ConfigurationError("A phased schedule needs at least one table.")
        if period < 1 or episodes < 1:
            raise ConfigurationError("Phased schedules need a positive period and length.")
        self.tables = tuple(_checked_tables(table, label="Phase table") for table in tables)
        self.period = period
        self._episodes = episodes

    @property
    def episodes(self) -> int | None:
        return self._episodes

    def phase(self, episode: int) -> int:
        return ((episode - 1) // self.period) % len(self.tables)

    def _table(self, episode: int) -> LossTable:
        return self.tables[self.phase(episode)]

    def realize(
        self,
        *,
        episode: int,
        layer: int,
        state: int,
        action: int,
        rng: np.random.Generator,
    ) -> float:
        return float(self._table(episode)[layer][state, action])

    def summed_table(self, episodes: int) -> LossTable:
        self.require_length(episodes)
        counts = np.zeros(len(self.tables))
        for episode in range(1, episodes + 1, self.period):
            span = min(self.period, episodes - episode + 1)
            counts[self.phase(episode)] += span
        return tuple(
            sum(count * table[layer] for count, table in zip(counts, self.tables))
            for layer in range(len(self.tables[0]))
        )


class ScheduledLosses(LossModel):
    """Oblivious adversary with one explicit table per episode.

    ``schedule[h]`` has shape ``(episodes, n_h, A)`` for ``h = 0..H``.
    """

    kind = LossKind.ADVERSARIAL

    def __init__(self, schedule: Sequence[np.ndarray]) -> None:
        checked = _checked_tables(schedule, label="Loss schedule")
        lengths = {layer.shape[0] for layer in checked}
        if len(lengths) != 1 or 0 in lengths:
            raise ConfigurationError("Every schedule layer must cover the same episodes.")
        self.schedule = checked
        self._episodes = lengths.pop()

    @property
    def episodes(self) -> int | None:
        return self._episodes

    def _table(self, episode: int) -> LossTable:
        return tuple(layer[episode - 1] for layer in self.schedule)

    def realize(
        self,
        *,
        episode: int,
        layer: int,
        state: int,
        action: int,
        rng: np.random.Generator,
    ) -> float:
        return float(self.schedule[layer][episode - 1, state, action])

    def summed_table(self, episodes: int) -> LossTable:
        self.require_length(episodes)
        return tuple(layer[:episodes].sum(axis=0) for layer in self.schedule)


def save_schedule(path: str | Path, losses: ScheduledLosses) -> None:
    np.savez_compressed(
        Path(path),
        **{f"layer_{layer}": values for layer, values in enumerate(losses.schedule)},
    )


def load_schedule(path: str | Path, *, horizon: int) -> ScheduledLosses:
    with np.load(Path(path)) as archive:
        missing = [f"layer_{layer}" for layer in range(horizon + 1) if f"layer_{layer}" not in archive]
        if missing:
            raise ConfigurationError(f"Loss schedule file lacks arrays: {', '.join(missing)}.")
        return ScheduledLosses([archive[f"layer_{layer}"] for layer in range(horizon + 1)])
