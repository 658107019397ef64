from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from state_free_rl_shared import PrunedSpaceSnapshot

from sf_rl_core.errors import ConfigurationError
from sf_rl_core.mdp import LayeredMdp, LossTable, Policy, State
from sf_rl_core.sampling import Trajectory, TrajectoryStep

# Lowest action index; also stands in for the auxiliary action.
DEFAULT_ACTION = 0


@dataclass(frozen=True)
class PrunedSpace:
    """Admitted real states per layer plus one auxiliary state on each layer 1..H.

    Pruned coordinates put the admitted states of a layer, sorted by their real
    index, at ``0..k-1`` and the auxiliary state at ``k``. The start and terminal
    layers are always admitted and have no auxiliary state.
    """

    layer_sizes: tuple[int, ...]
    n_actions: int
    admitted: tuple[frozenset[int], ...]
    version: int = 0

    @classmethod
    def initial(cls, layer_sizes: Sequence[int], n_actions: int) -> PrunedSpace:
        sizes = tuple(int(size) for size in layer_sizes)
        admitted = (
            (frozenset({0}),)
            + tuple(frozenset() for _ in sizes[1:-1])
            + (frozenset({0}),)
        )
        return cls(layer_sizes=sizes, n_actions=n_actions, admitted=admitted)

    @property
    def horizon(self) -> int:
        return len(self.layer_sizes) - 2

    @cached_property
    def ordered(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(layer)) for layer in self.admitted)

    @cached_property
    def _local(self) -> tuple[dict[int, int], ...]:
        return tuple(
            {state: local for local, state in enumerate(layer)} for layer in self.ordered
        )

    @property
    def pruned_layer_sizes(self) -> tuple[int, ...]:
        return (
            (1,)
            + tuple(len(self.admitted[layer]) + 1 for layer in range(1, self.horizon + 1))
            + (1,)
        )

    @property
    def size(self) -> int:
        """|S⊥|: admitted states plus auxiliaries over layers 1..H."""
        return sum(self.pruned_layer_sizes[1:-1])

    def is_admitted(self, state: State) -> bool:
        layer, index = state
        return index in self.admitted[layer]

    def admitted_states(self) -> list[State]:
        return [
            (layer, index)
            for layer in range(1, self.horizon + 1)
            for index in self.ordered[layer]
        ]

    def local_index(self, state: State) -> int:
        layer, index = state
        try:
            return self._local[layer][index]
        except KeyError as exc:
            raise ConfigurationError(f"State {state} is not admitted.") from exc

    def real_index(self, layer: int, local: int) -> int | None:
        ordered = self.ordered[layer]
        return ordered[local] if local < len(ordered) else None

    def auxiliary_index(self, layer: int) -> int:
        if not 1 <= layer <= self.horizon:
            raise ConfigurationError(f"Layer {layer} has no auxiliary state.")
        return len(self.admitted[layer])

    def with_admitted(self, states: Iterable[State]) -> PrunedSpace:
        additions: dict[int, set[int]] = {}
        for layer, index in states:
            if not 1 <= layer <= self.horizon or not 0 <= index < self.layer_sizes[layer]:
                raise ConfigurationError(f"State {(layer, index)} is not a loss-bearing state.")
            if index not in self.admitted[layer]:
                additions.setdefault(layer, set()).add(index)
        if not additions:
            return self
        admitted = tuple(
            layer_states | frozenset(additions.get(layer, ()))
            for layer, layer_states in enumerate(self.admitted)
        )
        return PrunedSpace(
            layer_sizes=self.layer_sizes,
            n_actions=self.n_actions,
            admitted=admitted,
            version=self.version + 1,
        )

    def require_compatible(self, mdp: LayeredMdp) -> None:
        if self.layer_sizes != mdp.layer_sizes or self.n_actions != mdp.n_actions:
            raise ConfigurationError("Pruned space does not match the MDP's layers.")

    def snapshot(self) -> PrunedSpaceSnapshot:
        return PrunedSpaceSnapshot(
            version=self.version,
            admitted=[list(self.ordered[layer]) for layer in range(1, self.horizon + 1)],
            size=self.size,
        )


def build_pruned_transition(mdp: LayeredMdp, space: PrunedSpace) -> LayeredMdp:
    space.require_compatible(mdp)
    sizes = space.pruned_layer_sizes
    horizon = mdp.horizon
    layers = []
    for layer in range(horizon + 1):
        table = np.zeros((sizes[layer], mdp.n_actions, sizes[layer + 1]))
        sources = space.ordered[layer]
        targets = list(space.ordered[layer + 1])
        for local, real in enumerate(sources):
            kept = mdp.transitions[layer][real][:, targets]
            table[local, :, : len(targets)] = kept
            if layer < horizon:
                table[local, :, len(targets)] = np.clip(1.0 - kept.sum(axis=1), 0.0, None)
        if 1 <= layer:
            next_auxiliary = 0 if layer == horizon else space.auxiliary_index(layer + 1)
            table[space.auxiliary_index(layer), :, next_auxiliary] = 1.0
        layers.append(table)
    return LayeredMdp(layer_sizes=sizes, n_actions=mdp.n_actions, transitions=tuple(layers))


def pruned_loss(loss_table: Sequence[np.ndarray], space: PrunedSpace) -> LossTable:
    sizes = space.pruned_layer_sizes
    tables = []
    for layer in range(space.horizon + 1):
        table = np.zeros((sizes[layer], space.n_actions))
        for local, real in enumerate(space.ordered[layer]):
            table[local] = loss_table[layer][real]
        tables.append(table)
    return tuple(tables)


def prune_trajectory(trajectory: Trajectory, space: PrunedSpace) -> Trajectory:
    """Copies steps while every state so far is admitted, auxiliary steps after."""
    steps: list[TrajectoryStep] = []
    left = False
    for layer, step in enumerate(trajectory.steps, start=1):
        left = left or not space.is_admitted((layer, step.state))
        if left:
            steps.append(
                TrajectoryStep(
                    state=space.auxiliary_index(layer),
                    action=DEFAULT_ACTION,
                    loss=0.0,
                    auxiliary=True,
                )
            )
        else:
            steps.append(
                TrajectoryStep(
                    state=space.local_index((layer, step.state)),
                    action=step.action,
                    loss=step.loss,
                )
            )
    return Trajectory(start_action=trajectory.start_action, steps=tuple(steps))


def extend_policy(pruned_policy: Policy, space: PrunedSpace, full_space: LayeredMdp) -> Policy:
    space.require_compatible(full_space)
    rows = []
    for layer in range(full_space.horizon + 1):
        table = np.zeros((full_space.layer_sizes[layer], full_space.n_actions))
        table[:, DEFAULT_ACTION] = 1.0
        for local, real in enumerate(space.ordered[layer]):
            table[real] = pruned_policy.rows[layer][local]
        rows.append(table)
    return Policy(tuple(rows))


def restrict_policy(policy: Policy, space: PrunedSpace) -> Policy:
    sizes = space.pruned_layer_sizes
    rows = []
    for layer in range(space.horizon + 1):
        table = np.zeros((sizes[layer], space.n_actions))
        table[:, DEFAULT_ACTION] = 1.0
        for local, real in enumerate(space.ordered[layer]):
            table[local] = policy.rows[layer][real]
        rows.append(table)
    return Policy(tuple(rows))
