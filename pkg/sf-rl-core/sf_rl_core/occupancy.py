from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from sf_rl_core.mdp import (
    LayeredMdp,
    Policy,
    require_loss_table_for,
    require_policy_for,
)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """``layers[h]`` has shape ``(n_h, A)``; each layer sums to one."""

    layers: tuple[np.ndarray, ...]

    def state_mass(self, layer: int) -> np.ndarray:
        return self.layers[layer].sum(axis=1)

    def layer_totals(self) -> list[float]:
        return [float(layer.sum()) for layer in self.layers]


def compute_occupancy(mdp: LayeredMdp, policy: Policy) -> OccupancyMeasure:
    require_policy_for(mdp, policy)
    state_mass = np.ones(1)
    layers = []
    for layer in range(mdp.horizon + 1):
        pairs = state_mass[:, None] * policy.rows[layer]
        layers.append(pairs)
        state_mass = np.einsum("sa,sab->b", pairs, mdp.transitions[layer])
    return OccupancyMeasure(tuple(layers))


def expected_loss(q: OccupancyMeasure, loss_table: Sequence[np.ndarray]) -> float:
    if len(loss_table) != len(q.layers):
        raise ValueError("Occupancy and loss table cover different layers.")
    return float(
        sum(np.sum(pairs * np.asarray(losses)) for pairs, losses in zip(q.layers, loss_table))
    )


def best_in_hindsight(
    mdp: LayeredMdp,
    summed_losses: Sequence[np.ndarray],
) -> tuple[Policy, float]:
    """Backward DP on the known transition; ties go to the lowest action index."""
    require_loss_table_for(mdp, summed_losses)
    value_next = np.zeros(1)
    actions: list[np.ndarray] = [np.zeros(0, dtype=int)] * (mdp.horizon + 1)
    for layer in range(mdp.horizon, -1, -1):
        q_values = np.asarray(summed_losses[layer], dtype=float) + np.einsum(
            "sab,b->sa", mdp.transitions[layer], value_next
        )
        best = np.argmin(q_values, axis=1)
        actions[layer] = best
        value_next = q_values[np.arange(q_values.shape[0]), best]
    return Policy.deterministic(actions, mdp.n_actions), float(value_next[0])


def max_reach_probabilities(mdp: LayeredMdp) -> tuple[np.ndarray, ...]:
    """Per-state ``max over policies`` of the visit probability, one array per layer.

    The maximizing policy depends on the target, so each target gets its own
    backward recursion; all targets of one layer are solved together.
    """
    reach = [np.ones(1)]
    for target_layer in range(1, mdp.horizon + 2):
        values = np.eye(mdp.layer_sizes[target_layer])
        for layer in range(target_layer - 1, -1, -1):
            values = np.einsum("sab,bt->sat", mdp.transitions[layer], values).max(axis=1)
        reach.append(values[0])
    return tuple(reach)
