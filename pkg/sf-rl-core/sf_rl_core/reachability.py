from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from sf_rl_core.errors import EpisodeOrderError
from sf_rl_core.mdp import State
from sf_rl_core.sampling import Trajectory

DEFAULT_THRESHOLD_CONSTANT = 0.5
# Confidence level index of the start state, which is known before any episode.
START_STATE_INDEX = 1


@dataclass(frozen=True, eq=False)
class CountsSnapshot:
    pair_counts: tuple[np.ndarray, ...]
    transition_counts: tuple[np.ndarray, ...]


class VisitStats:
    """Exact visit counters over a layered state space, single writer.

    Layers run 0..H+1. ``pair_counts[h]`` is N(s, a) with shape ``(n_h, A)`` and
    ``transition_counts[h]`` is M(s'|s, a) with shape ``(n_h, A, n_{h+1})``.
    Counts are frozen at the end of every episode in which a state arrives.
    Arrival indices rank the loss-bearing states of layers 1..H only.
    """

    def __init__(self, layer_sizes: Sequence[int], n_actions: int) -> None:
        self.layer_sizes = tuple(int(size) for size in layer_sizes)
        self.n_actions = n_actions
        self.visits = [np.zeros(size, dtype=np.int64) for size in self.layer_sizes]
        self.unadmitted_visits = [np.zeros(size, dtype=np.int64) for size in self.layer_sizes]
        self.arrival_episode = [np.full(size, math.inf) for size in self.layer_sizes]
        self.arrival_index = [np.zeros(size, dtype=np.int64) for size in self.layer_sizes]
        self.pair_counts = [
            np.zeros((size, n_actions), dtype=np.int64) for size in self.layer_sizes[:-1]
        ]
        self.transition_counts = [
            np.zeros((self.layer_sizes[layer], n_actions, self.layer_sizes[layer + 1]), dtype=np.int64)
            for layer in range(len(self.layer_sizes) - 1)
        ]
        self.last_episode = 0
        self._arrivals = 0
        self._snapshots: dict[int, CountsSnapshot] = {}

    @property
    def horizon(self) -> int:
        return len(self.layer_sizes) - 2

    def record_episode(
        self,
        trajectory: Trajectory,
        episode: int,
        *,
        admitted: set[State] | None = None,
    ) -> list[State]:
        """Adds one episode; returns the states that arrived during it.

        ``admitted`` marks the admitted states, so visits to others are also
        counted as unadmitted visits.
        """
        if episode <= self.last_episode:
            raise EpisodeOrderError(
                f"Episode {episode} recorded after episode {self.last_episode}."
            )
        if trajectory.horizon != self.horizon:
            raise ValueError(
                f"Trajectory covers {trajectory.horizon} layers, counters cover {self.horizon}."
            )
        self.last_episode = episode

        path = [(0, trajectory.start_action)] + [
            (step.state, step.action) for step in trajectory.steps
        ]
        states = [state for state, _ in path] + [0]
        arrived: list[State] = []
        for layer, state in enumerate(states):
            self.visits[layer][state] += 1
            if math.isinf(self.arrival_episode[layer][state]):
                self.arrival_episode[layer][state] = episode
                arrived.append((layer, state))
                if 1 <= layer <= self.horizon:
                    self._arrivals += 1
                    self.arrival_index[layer][state] = self._arrivals
            if admitted is not None and 1 <= layer <= self.horizon and (layer, state) not in admitted:
                self.unadmitted_visits[layer][state] += 1
        for layer, (state, action) in enumerate(path):
            self.pair_counts[layer][state, action] += 1
            self.transition_counts[layer][state, action, states[layer + 1]] += 1

        if arrived:
            self._snapshots[episode] = CountsSnapshot(
                pair_counts=tuple(counts.copy() for counts in self.pair_counts),
                transition_counts=tuple(counts.copy() for counts in self.transition_counts),
            )
        return arrived

    def visit_count(self, state: State) -> int:
        layer, index = state
        return int(self.visits[layer][index])

    def arrival(self, state: State) -> float:
        """Episode t(s) of the first visit, infinite when unvisited."""
        layer, index = state
        return float(self.arrival_episode[layer][index])

    def arrival_order(self, state: State) -> int | None:
        """Arrival index i(s), ``None`` when unvisited or outside layers 1..H."""
        layer, index = state
        value = int(self.arrival_index[layer][index])
        return value or None

    def allocation_orders(self, layer: int) -> np.ndarray:
        """Indices that size confidence levels; the visited start state takes ``START_STATE_INDEX``."""
        if layer == 0:
            return np.where(self.visits[0] > 0, START_STATE_INDEX, 0)
        return self.arrival_index[layer]

    def allocation_order(self, state: State) -> int | None:
        layer, index = state
        value = int(self.allocation_orders(layer)[index])
        return value or None

    def visited_before(self, episode: float) -> int:
        """Distinct loss-bearing states first visited strictly before ``episode``."""
        return int(
            sum(
                np.count_nonzero(self.arrival_episode[layer] < episode)
                for layer in range(1, self.horizon + 1)
            )
        )

    def counts_at(self, episode: float) -> CountsSnapshot:
        """Counts at the end of an arrival episode; zero before the first episode."""
        if episode <= 0:
            return CountsSnapshot(
                pair_counts=tuple(np.zeros_like(counts) for counts in self.pair_counts),
                transition_counts=tuple(
                    np.zeros_like(counts) for counts in self.transition_counts
                ),
            )
        try:
            return self._snapshots[int(episode)]
        except KeyError as exc:
            raise KeyError(f"No counts were frozen at episode {episode}.") from exc

    def visited_states(self) -> list[State]:
        return [
            (layer, int(index))
            for layer in range(1, self.horizon + 1)
            for index in np.flatnonzero(self.visits[layer])
        ]


def admission_margin(
    visits: int,
    *,
    episode: int,
    delta: float,
    epsilon: float,
    horizon: int,
    threshold_constant: float = DEFAULT_THRESHOLD_CONSTANT,
) -> float:
    log_term = math.log(2.0 * horizon**2 * episode**2 / delta)
    return visits / 2.0 - log_term / 2.0 - threshold_constant - epsilon * episode


def admission_test(
    stats: VisitStats,
    state: State,
    *,
    episode: int,
    delta: float,
    epsilon: float,
    horizon: int,
    threshold_constant: float = DEFAULT_THRESHOLD_CONSTANT,
) -> bool:
    return (
        admission_margin(
            stats.visit_count(state),
            episode=episode,
            delta=delta,
            epsilon=epsilon,
            horizon=horizon,
            threshold_constant=threshold_constant,
        )
        > 0.0
    )


def unadmitted_visit_bound(*, episodes: int, delta: float, epsilon: float, horizon: int) -> float:
    """Most episodes a state can be visited before it must have been admitted."""
    if episodes < 1:
        return 0.0
    return 2.0 * epsilon * episodes + 2.0 * math.log(2.0 * horizon**2 * episodes**2 / delta) + 2.0


class ConcentrationFamily(str, Enum):
    BERNOULLI = "bernoulli"
    DRIFTING_BERNOULLI = "drifting-bernoulli"
    ZERO = "zero"


DRIFT_GRID = (0.1, 0.5, 0.9, 0.3)


def conditional_means(family: ConcentrationFamily, length: int, *, mean: float = 0.3) -> np.ndarray:
    if family == ConcentrationFamily.BERNOULLI:
        return np.full(length, mean)
    if family == ConcentrationFamily.DRIFTING_BERNOULLI:
        return np.resize(np.asarray(DRIFT_GRID), length)
    return np.zeros(length)


def supermartingale_violation_rates(
    family: ConcentrationFamily,
    *,
    delta: float,
    length: int,
    trials: int,
    rng: np.random.Generator,
    mean: float = 0.3,
    chunk_size: int = 256,
) -> tuple[float, float]:
    """Fractions of sequences on which either one-sided bound ever fails.

    Upper event: some prefix has sum X > 2 sum P + ln(1/delta).
    Lower event: some prefix has sum P > 2 sum X + ln(1/delta).
    """
    if trials < 1:
        return 0.0, 0.0
    means = conditional_means(family, length, mean=mean)
    mean_sums = np.cumsum(means)
    slack = math.log(1.0 / delta)
    upper = lower = 0
    for start in range(0, trials, chunk_size):
        rows = min(chunk_size, trials - start)
        draws = (rng.random((rows, length)) < means).astype(float)
        draw_sums = np.cumsum(draws, axis=1)
        upper += int(np.count_nonzero(np.any(draw_sums > 2.0 * mean_sums + slack, axis=1)))
        lower += int(np.count_nonzero(np.any(mean_sums > 2.0 * draw_sums + slack, axis=1)))
    return upper / trials, lower / trials
