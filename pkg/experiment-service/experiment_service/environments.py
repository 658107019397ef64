from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from state_free_rl_shared import EnvFamilySpec, LossKind

from sf_rl_core.losses import LossModel, PhasedLosses, StochasticLosses
from sf_rl_core.mdp import LayeredMdp, LossTable, State, loss_table_from_layers
from sf_rl_core.occupancy import max_reach_probabilities


@dataclass(frozen=True, eq=False)
class GeneratedEnvironment:
    """An MDP, its loss model and the exact per-state maximum reach probability."""

    name: str
    mdp: LayeredMdp
    losses: LossModel
    reach: tuple[np.ndarray, ...]

    def reachable_states(self, epsilon: float = 0.0) -> list[State]:
        return [
            (layer, int(index))
            for layer in range(1, self.mdp.horizon + 1)
            for index in np.flatnonzero(self.reach[layer] > epsilon)
        ]


def generate_env(spec: EnvFamilySpec) -> GeneratedEnvironment:
    """Random layered MDP whose padded states get no incoming transition mass.

    Reachable states of a layer occupy the lowest indices, padded states follow.
    Reachable and padded rows draw from separate streams, so the reachable core
    of a seed is the same whatever the padding.
    """
    core_seed, padding_seed = np.random.SeedSequence(spec.seed).spawn(2)
    core_rng = np.random.default_rng(core_seed)
    padding_rng = np.random.default_rng(padding_seed)

    reachable = [1, *spec.reachable_states, 1]
    padding = [0, *spec.padding(), 0]
    layer_sizes = tuple(count + pad for count, pad in zip(reachable, padding))

    transitions = []
    for layer in range(spec.horizon + 1):
        rows = np.zeros((layer_sizes[layer], spec.actions, layer_sizes[layer + 1]))
        if layer == spec.horizon:
            rows[..., 0] = 1.0
        else:
            concentration = np.full(reachable[layer + 1], spec.transition_concentration)
            rows[: reachable[layer], :, : reachable[layer + 1]] = core_rng.dirichlet(
                concentration, size=(reachable[layer], spec.actions)
            )
            rows[reachable[layer] :, :, : reachable[layer + 1]] = padding_rng.dirichlet(
                concentration, size=(padding[layer], spec.actions)
            )
        transitions.append(rows)
    mdp = LayeredMdp(layer_sizes=layer_sizes, n_actions=spec.actions, transitions=tuple(transitions))

    def draw_table() -> LossTable:
        low, high = spec.loss.mean_low, spec.loss.mean_high
        layers = []
        for layer in range(1, spec.horizon + 1):
            core = core_rng.uniform(low, high, size=(reachable[layer], spec.actions))
            padded = padding_rng.uniform(low, high, size=(padding[layer], spec.actions))
            layers.append(np.vstack([core, padded]))
        return loss_table_from_layers(layer_sizes, spec.actions, layers)

    losses: LossModel
    if spec.loss.kind == LossKind.STOCHASTIC:
        losses = StochasticLosses(draw_table())
    else:
        losses = PhasedLosses(
            [draw_table() for _ in range(spec.loss.phases)],
            period=spec.loss.period,
            episodes=spec.loss.episodes,
        )
    return GeneratedEnvironment(
        name=spec.name,
        mdp=mdp,
        losses=losses,
        reach=max_reach_probabilities(mdp),
    )
