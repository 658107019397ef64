from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from sf_rl_core.confidence import TransitionConfidenceSet
from sf_rl_core.mdp import Policy
from sf_rl_core.sampling import Trajectory


@dataclass(frozen=True)
class LearnerSpace:
    """State space handed to a learner on (re)start; layers 0..H+1."""

    layer_sizes: tuple[int, ...]
    n_actions: int

    @property
    def horizon(self) -> int:
        return len(self.layer_sizes) - 2

    @property
    def state_count(self) -> int:
        return sum(self.layer_sizes[1:-1])


class EpisodicLearner(Protocol):
    def restart(self, space: LearnerSpace, *, delta: float) -> None: ...

    def propose_policy(self, episode: int) -> Policy: ...

    def observe(self, trajectory: Trajectory, episode: int) -> None: ...


@runtime_checkable
class ConfidenceInjectable(Protocol):
    def inject_confidence_set(self, confidence_set: TransitionConfidenceSet) -> None: ...
