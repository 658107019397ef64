from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from sf_rl_core.errors import ConfigurationError

ROW_SUM_TOLERANCE = 1e-12

# (layer, index within the layer)
State = tuple[int, int]

# One array per layer 0..H, shaped (states in layer, actions).
LossTable = tuple[np.ndarray, ...]


def _normalized_rows(values: ArrayLike, *, label: str) -> np.ndarray:
    rows = np.array(values, dtype=float)
    if np.any(~np.isfinite(rows)) or np.any(rows < 0.0):
        raise ConfigurationError(f"{label} holds negative or non-finite probabilities.")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ConfigurationError(
            f"{label} rows must sum to 1 within {ROW_SUM_TOLERANCE}; off by {worst:.3e}."
        )
    rows = rows / sums[..., None]
    rows.setflags(write=False)
    return rows


@dataclass(frozen=True, eq=False)
class LayeredMdp:
    """Layered episodic MDP: layer 0 holds the start state, layer H+1 the terminal.

    ``transitions[h]`` has shape ``(n_h, A, n_{h+1})`` for ``h = 0..H``.
    """

    layer_sizes: tuple[int, ...]
    n_actions: int
    transitions: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(size) for size in self.layer_sizes)
        if len(sizes) < 3:
            raise ConfigurationError("A layered MDP needs at least one loss-bearing layer.")
        if sizes[0] != 1 or sizes[-1] != 1:
            raise ConfigurationError("Start and terminal layers must hold exactly one state.")
        if any(size < 1 for size in sizes):
            raise ConfigurationError("Every layer must hold at least one state.")
        if self.n_actions < 1:
            raise ConfigurationError("At least one action is required.")
        if len(self.transitions) != len(sizes) - 1:
            raise ConfigurationError(
                f"Expected {len(sizes) - 1} transition layers, got {len(self.transitions)}."
            )

        rows = []
        for layer, table in enumerate(self.transitions):
            expected = (sizes[layer], self.n_actions, sizes[layer + 1])
            array = np.asarray(table, dtype=float)
            if array.shape != expected:
                raise ConfigurationError(
                    f"Transition layer {layer} has shape {array.shape}, expected {expected}."
                )
            rows.append(_normalized_rows(array, label=f"Transition layer {layer}"))
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "transitions", tuple(rows))

    @property
    def horizon(self) -> int:
        return len(self.layer_sizes) - 2

    @property
    def state_count(self) -> int:
        """States on the loss-bearing layers 1..H."""
        return sum(self.layer_sizes[1:-1])

    def contains(self, state: State) -> bool:
        layer, index = state
        return 0 <= layer < len(self.layer_sizes) and 0 <= index < self.layer_sizes[layer]

    def states(self, layer: int) -> list[State]:
        return [(layer, index) for index in range(self.layer_sizes[layer])]


@dataclass(frozen=True, eq=False)
class Policy:
    """Stochastic tabular policy; ``rows[h]`` has shape ``(n_h, A)`` for ``h = 0..H``."""

    rows: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        normalized = tuple(
            _normalized_rows(layer_rows, label=f"Policy layer {layer}")
            for layer, layer_rows in enumerate(self.rows)
        )
        object.__setattr__(self, "rows", normalized)

    @classmethod
    def uniform(cls, layer_sizes: Sequence[int], n_actions: int) -> Policy:
        return cls(
            tuple(
                np.full((size, n_actions), 1.0 / n_actions)
                for size in layer_sizes[:-1]
            )
        )

    @classmethod
    def deterministic(cls, actions: Sequence[ArrayLike], n_actions: int) -> Policy:
        rows = []
        for layer_actions in actions:
            chosen = np.asarray(layer_actions, dtype=int)
            table = np.zeros((chosen.size, n_actions))
            table[np.arange(chosen.size), chosen] = 1.0
            rows.append(table)
        return cls(tuple(rows))

    @property
    def n_actions(self) -> int:
        return int(self.rows[0].shape[1])

    def action_probabilities(self, state: State) -> np.ndarray:
        layer, index = state
        return self.rows[layer][index]


def require_policy_for(mdp: LayeredMdp, policy: Policy) -> None:
    if len(policy.rows) != mdp.horizon + 1:
        raise ConfigurationError(
            f"Policy covers {len(policy.rows)} layers, MDP needs {mdp.horizon + 1}."
        )
    for layer, rows in enumerate(policy.rows):
        expected = (mdp.layer_sizes[layer], mdp.n_actions)
        if rows.shape != expected:
            raise ConfigurationError(
                f"Policy layer {layer} has shape {rows.shape}, expected {expected}."
            )


def loss_table_from_layers(
    layer_sizes: Sequence[int],
    n_actions: int,
    loss_bearing: Sequence[ArrayLike],
) -> LossTable:
    """Builds a full loss table from layers 1..H; the start layer is loss free."""
    horizon = len(layer_sizes) - 2
    if len(loss_bearing) != horizon:
        raise ConfigurationError(f"Expected loss tables for {horizon} layers.")
    tables = [np.zeros((1, n_actions))]
    for layer, values in enumerate(loss_bearing, start=1):
        table = np.array(values, dtype=float)
        expected = (layer_sizes[layer], n_actions)
        if table.shape != expected:
            raise ConfigurationError(
                f"Loss layer {layer} has shape {table.shape}, expected {expected}."
            )
        if np.any(~np.isfinite(table)) or np.any(table < 0.0) or np.any(table > 1.0):
            raise ConfigurationError(f"Loss layer {layer} must lie in [0, 1].")
        tables.append(table)
    for table in tables:
        table.setflags(write=False)
    return tuple(tables)


def require_loss_table_for(mdp: LayeredMdp, loss_table: Sequence[np.ndarray]) -> None:
    if len(loss_table) != mdp.horizon + 1:
        raise ConfigurationError(
            f"Loss table covers {len(loss_table)} layers, MDP needs {mdp.horizon + 1}."
        )
    for layer, table in enumerate(loss_table):
        expected = (mdp.layer_sizes[layer], mdp.n_actions)
        if np.shape(table) != expected:
            raise ConfigurationError(
                f"Loss layer {layer} has shape {np.shape(table)}, expected {expected}."
            )
