from __future__ import annotations

import numpy as np

from sf_rl_core.learners.uob_reps import adaptive_rate, loss_estimator


class Exp3IxReference:
    """EXP3-IX in mirror-descent form with the adaptive shared rate.

    Mirrors the occupancy learner on a one-state, one-step problem: the update
    from episode k is applied when episode k+1 asks for its policy.
    """

    def __init__(self, *, n_actions: int, delta: float) -> None:
        self.n_actions = n_actions
        self.delta = delta
        self.probabilities = np.full(n_actions, 1.0 / n_actions)
        self.episode_count = 0
        self._pending: tuple[np.ndarray, float] | None = None

    def rate(self) -> float:
        return adaptive_rate(
            horizon=1,
            n_states=1,
            n_actions=self.n_actions,
            episode_count=max(self.episode_count, 1),
            delta=self.delta,
        )

    def propose_policy(self) -> np.ndarray:
        self.episode_count += 1
        if self._pending is not None:
            estimates, rate = self._pending
            weights = self.probabilities * np.exp(-rate * estimates)
            self.probabilities = weights / weights.sum()
            self._pending = None
        return self.probabilities.copy()

    def observe(self, action: int, loss: float) -> None:
        rate = self.rate()
        estimates = np.zeros(self.n_actions)
        estimates[action] = loss_estimator(loss, self.probabilities[action], rate, True)
        self._pending = (estimates, rate)
