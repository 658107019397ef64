from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from sf_rl_core.losses import LossModel
from sf_rl_core.mdp import LayeredMdp, Policy, State, require_policy_for


@dataclass(frozen=True)
class TrajectoryStep:
    state: int
    action: int
    loss: float
    auxiliary: bool = False


@dataclass(frozen=True)
class Trajectory:
    """Start action at s_0 followed by one step per loss-bearing layer 1..H."""

    start_action: int
    steps: tuple[TrajectoryStep, ...]

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def total_loss(self) -> float:
        return float(sum(step.loss for step in self.steps))

    def states(self) -> list[State]:
        return [(layer, step.state) for layer, step in enumerate(self.steps, start=1)]

    def path(self) -> tuple[int, tuple[tuple[int, int], ...]]:
        return self.start_action, tuple((step.state, step.action) for step in self.steps)


@dataclass(frozen=True)
class PathMass:
    probability: float
    expected_losses: tuple[float, ...]


def draw_index(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probabilities)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, len(probabilities) - 1)


def sample_trajectory(
    mdp: LayeredMdp,
    policy: Policy,
    losses: LossModel,
    episode: int,
    rng: np.random.Generator,
) -> Trajectory:
    require_policy_for(mdp, policy)
    losses.require_episode(episode)

    start_action = draw_index(policy.rows[0][0], rng)
    state = draw_index(mdp.transitions[0][0, start_action], rng)
    steps = []
    for layer in range(1, mdp.horizon + 1):
        action = draw_index(policy.rows[layer][state], rng)
        loss = losses.realize(
            episode=episode,
            layer=layer,
            state=state,
            action=action,
            rng=rng,
        )
        steps.append(TrajectoryStep(state=state, action=action, loss=loss))
        state = draw_index(mdp.transitions[layer][state, action], rng)
    return Trajectory(start_action=start_action, steps=tuple(steps))


def trajectory_distribution(
    mdp: LayeredMdp,
    policy: Policy,
    loss_table: Sequence[np.ndarray],
) -> dict[tuple[int, tuple[tuple[int, int], ...]], PathMass]:
    """Exact law of (start action, state-action path) with expected step losses."""
    require_policy_for(mdp, policy)
    distribution: dict[tuple[int, tuple[tuple[int, int], ...]], PathMass] = {}

    def extend(
        start_action: int,
        layer: int,
        state: int,
        probability: float,
        path: tuple[tuple[int, int], ...],
        step_losses: tuple[float, ...],
    ) -> None:
        if layer > mdp.horizon:
            key = (start_action, path)
            previous = distribution.get(key)
            total = probability + (previous.probability if previous else 0.0)
            distribution[key] = PathMass(probability=total, expected_losses=step_losses)
            return
        for action, action_probability in enumerate(policy.rows[layer][state]):
            if action_probability == 0.0:
                continue
            step = (state, action)
            loss = float(loss_table[layer][state, action])
            if layer == mdp.horizon:
                extend(
                    start_action,
                    layer + 1,
                    0,
                    probability * action_probability,
                    path + (step,),
                    step_losses + (loss,),
                )
                continue
            for next_state, move in enumerate(mdp.transitions[layer][state, action]):
                if move == 0.0:
                    continue
                extend(
                    start_action,
                    layer + 1,
                    next_state,
                    probability * action_probability * move,
                    path + (step,),
                    step_losses + (loss,),
                )

    for start_action, action_probability in enumerate(policy.rows[0][0]):
        if action_probability == 0.0:
            continue
        for state, move in enumerate(mdp.transitions[0][0, start_action]):
            if move == 0.0:
                continue
            extend(start_action, 1, state, action_probability * move, (), ())
    return distribution
