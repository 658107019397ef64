from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from sf_rl_core.learners.base import LearnerSpace
from sf_rl_core.mdp import Policy
from sf_rl_core.reachability import VisitStats
from sf_rl_core.sampling import Trajectory


def standard_bonus(
    counts: ArrayLike,
    *,
    n_states: int,
    n_actions: int,
    episodes: int,
    delta: float,
    horizon: int,
    constant: float = 1.0,
) -> np.ndarray:
    """c H L / sqrt(N) with L = ln(|S||A|T/delta), capped at H; H for unvisited pairs."""
    visits = np.asarray(counts, dtype=float)
    log_term = math.log(n_states * n_actions * max(episodes, 1) / delta)
    bonus = constant * horizon * log_term / np.sqrt(np.maximum(visits, 1.0))
    return np.where(visits > 0, np.minimum(horizon, bonus), float(horizon))


def arrival_bonus(
    counts: ArrayLike,
    arrival_index: ArrayLike,
    *,
    n_actions: int,
    episodes: int,
    delta: float,
    horizon: int,
    constant: float = 1.0,
) -> np.ndarray:
    """Bonus whose log term depends on the arrival index i(s) instead of |S|.

    ``arrival_index`` broadcasts against ``counts``; zero marks an unvisited state.
    """
    visits = np.asarray(counts, dtype=float)
    order = np.asarray(arrival_index, dtype=float)
    log_term = np.log(2.0 * np.maximum(order, 1.0) ** 2 * n_actions * max(episodes, 1) / delta)
    bonus = constant * horizon * log_term * np.sqrt(1.0 / np.maximum(visits - 1.0, 1.0))
    informed = (visits > 0) & (order > 0)
    return np.where(informed, np.minimum(horizon, bonus), float(horizon))


def value_iteration(
    mean_losses: Sequence[np.ndarray],
    transitions: Sequence[np.ndarray],
    bonuses: Sequence[np.ndarray],
) -> tuple[list[np.ndarray], list[np.ndarray], Policy]:
    """Optimistic backward recursion under losses, layers H..0.

    Q = max(0, c + <P, V'> - b) and V = min over actions of Q; greedy ties go to
    the lowest action index.
    """
    layers = len(mean_losses)
    q_tables: list[np.ndarray] = [np.zeros(0)] * layers
    values: list[np.ndarray] = [np.zeros(0)] * (layers + 1)
    values[layers] = np.zeros(1)
    actions: list[np.ndarray] = [np.zeros(0, dtype=int)] * layers
    for layer in range(layers - 1, -1, -1):
        q = mean_losses[layer] + np.einsum("sab,b->sa", transitions[layer], values[layer + 1])
        q = np.maximum(0.0, q - bonuses[layer])
        q_tables[layer] = q
        actions[layer] = np.argmin(q, axis=1)
        values[layer] = q[np.arange(q.shape[0]), actions[layer]]
    n_actions = int(mean_losses[0].shape[1])
    return q_tables, values, Policy.deterministic(actions, n_actions)


class UcbviLearner:
    """UCBVI in loss form, with either the |S|-based or the arrival-index bonus."""

    def __init__(
        self,
        *,
        episodes: int,
        bonus_constant: float = 1.0,
        use_arrival_bonus: bool = False,
    ) -> None:
        self.episodes = episodes
        self.bonus_constant = bonus_constant
        self.use_arrival_bonus = use_arrival_bonus
        self.space: LearnerSpace | None = None
        self.delta = 1.0
        self.stats: VisitStats | None = None
        self.loss_sums: list[np.ndarray] = []

    def restart(self, space: LearnerSpace, *, delta: float) -> None:
        self.space = space
        self.delta = delta
        self.stats = VisitStats(space.layer_sizes, space.n_actions)
        self.loss_sums = [np.zeros((size, space.n_actions)) for size in space.layer_sizes[:-1]]

    def bonuses(self) -> list[np.ndarray]:
        space, stats = self._require_started()
        tables = []
        for layer, counts in enumerate(stats.pair_counts):
            if self.use_arrival_bonus:
                tables.append(
                    arrival_bonus(
                        counts,
                        stats.allocation_orders(layer)[:, None],
                        n_actions=space.n_actions,
                        episodes=self.episodes,
                        delta=self.delta,
                        horizon=space.horizon,
                        constant=self.bonus_constant,
                    )
                )
            else:
                tables.append(
                    standard_bonus(
                        counts,
                        n_states=space.state_count,
                        n_actions=space.n_actions,
                        episodes=self.episodes,
                        delta=self.delta,
                        horizon=space.horizon,
                        constant=self.bonus_constant,
                    )
                )
        return tables

    def propose_policy(self, episode: int) -> Policy:
        _, stats = self._require_started()
        mean_losses, transitions = [], []
        for layer, counts in enumerate(stats.pair_counts):
            visits = np.maximum(counts, 1)
            mean_losses.append(self.loss_sums[layer] / visits)
            transitions.append(stats.transition_counts[layer] / visits[..., None])
        _, _, policy = value_iteration(mean_losses, transitions, self.bonuses())
        return policy

    def observe(self, trajectory: Trajectory, episode: int) -> None:
        _, stats = self._require_started()
        stats.record_episode(trajectory, episode)
        for layer, step in enumerate(trajectory.steps, start=1):
            self.loss_sums[layer][step.state, step.action] += step.loss

    def _require_started(self) -> tuple[LearnerSpace, VisitStats]:
        if self.space is None or self.stats is None:
            raise RuntimeError("Learner used before restart().")
        return self.space, self.stats
