from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike

from sf_rl_core.confidence import TransitionConfidenceSet, build_baseline_set
from sf_rl_core.learners.base import LearnerSpace
from sf_rl_core.learners.occupancy_bounds import upper_occupancy
from sf_rl_core.learners.projection import (
    DEFAULT_KKT_TOLERANCE,
    DEFAULT_MAX_ITERATIONS,
    kl_project,
    policy_from_occupancy,
)
from sf_rl_core.mdp import Policy
from sf_rl_core.reachability import VisitStats
from sf_rl_core.sampling import Trajectory


def loss_estimator(
    losses: ArrayLike,
    upper_bounds: ArrayLike,
    gamma: float,
    visited: ArrayLike,
) -> np.ndarray:
    """Implicit-exploration estimate: loss / (u + gamma) on visited pairs, zero elsewhere."""
    observed = np.asarray(losses, dtype=float)
    bounds = np.asarray(upper_bounds, dtype=float)
    return np.where(np.asarray(visited, dtype=bool), observed / (bounds + gamma), 0.0)


def adaptive_rate(
    *,
    horizon: int,
    n_states: int,
    n_actions: int,
    episode_count: int,
    delta: float,
) -> float:
    """Shared learning and exploration rate for the ``episode_count``-th episode since restart."""
    log_term = math.log(horizon * n_states * n_actions / delta)
    return math.sqrt(horizon * log_term / (n_states * n_actions * episode_count))


def uniform_occupancy(layer_sizes: tuple[int, ...], n_actions: int) -> list[np.ndarray]:
    return [
        np.full(
            (layer_sizes[layer], n_actions, layer_sizes[layer + 1]),
            1.0 / (layer_sizes[layer] * n_actions * layer_sizes[layer + 1]),
        )
        for layer in range(len(layer_sizes) - 1)
    ]


class UobRepsLearner:
    """Occupancy-measure mirror descent with upper-occupancy implicit exploration.

    The update is lazy: ``observe`` stores the loss estimate and the next
    ``propose_policy`` applies the multiplicative step, then projects onto the
    confidence set current for that episode.
    """

    def __init__(
        self,
        *,
        episodes: int,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
        tolerance: float = DEFAULT_KKT_TOLERANCE,
    ) -> None:
        self.episodes = episodes
        self.max_iterations = max_iterations
        self.tolerance = tolerance
        self.space: LearnerSpace | None = None
        self.delta = 1.0
        self.stats: VisitStats | None = None
        self.occupancy: list[np.ndarray] = []
        self.episode_count = 0
        self.policy: Policy | None = None
        self.confidence_set: TransitionConfidenceSet | None = None
        self._injected: TransitionConfidenceSet | None = None
        self._pending: tuple[list[np.ndarray], float] | None = None

    def restart(self, space: LearnerSpace, *, delta: float) -> None:
        self.space = space
        self.delta = delta
        self.stats = VisitStats(space.layer_sizes, space.n_actions)
        self.occupancy = uniform_occupancy(space.layer_sizes, space.n_actions)
        self.episode_count = 0
        self.policy = Policy(tuple(policy_from_occupancy(self.occupancy)))
        self.confidence_set = None
        self._injected = None
        self._pending = None

    def inject_confidence_set(self, confidence_set: TransitionConfidenceSet) -> None:
        space, _ = self._require_started()
        if confidence_set.layer_sizes != space.layer_sizes:
            raise ValueError("Injected confidence set does not match the learner's space.")
        self._injected = confidence_set

    def rate(self) -> float:
        space, _ = self._require_started()
        return adaptive_rate(
            horizon=space.horizon,
            n_states=space.state_count,
            n_actions=space.n_actions,
            episode_count=max(self.episode_count, 1),
            delta=self.delta,
        )

    def current_confidence_set(self) -> TransitionConfidenceSet:
        space, stats = self._require_started()
        if self._injected is not None:
            return self._injected
        return build_baseline_set(
            stats.pair_counts,
            stats.transition_counts,
            n_states=space.state_count,
            n_actions=space.n_actions,
            episodes=self.episodes,
            delta=self.delta,
        )

    def propose_policy(self, episode: int) -> Policy:
        self._require_started()
        self.episode_count += 1
        confidence_set = self.current_confidence_set()
        if self._pending is not None or self._injected is not None:
            target = self.occupancy
            if self._pending is not None:
                estimates, rate = self._pending
                target = [
                    layer * np.exp(-rate * estimate[..., None])
                    for layer, estimate in zip(self.occupancy, estimates)
                ]
            self.occupancy = kl_project(
                target,
                confidence_set,
                max_iterations=self.max_iterations,
                tolerance=self.tolerance,
            )
            self._pending = None
            self.policy = Policy(tuple(policy_from_occupancy(self.occupancy)))
        self.confidence_set = confidence_set
        if self.policy is None:
            raise RuntimeError("Learner holds no policy after restart().")
        return self.policy

    def observe(self, trajectory: Trajectory, episode: int) -> None:
        space, stats = self._require_started()
        if self.policy is None or self.confidence_set is None:
            raise RuntimeError("observe() called before propose_policy().")
        rate = self.rate()
        estimates = [np.zeros((size, space.n_actions)) for size in space.layer_sizes[:-1]]
        for layer, step in enumerate(trajectory.steps, start=1):
            if step.loss == 0.0:
                continue
            bound = upper_occupancy(
                self.confidence_set,
                self.policy,
                (layer, step.state, step.action),
            )
            estimates[layer][step.state, step.action] = loss_estimator(
                step.loss, bound, rate, True
            )
        self._pending = (estimates, rate)
        stats.record_episode(trajectory, episode)

    def _require_started(self) -> tuple[LearnerSpace, VisitStats]:
        if self.space is None or self.stats is None:
            raise RuntimeError("Learner used before restart().")
        return self.space, self.stats
