from __future__ import annotations

import numpy as np

from sf_rl_core.confidence import TransitionConfidenceSet
from sf_rl_core.errors import ConfidenceSetInconsistency
from sf_rl_core.mdp import Policy

FEASIBILITY_TOLERANCE = 1e-9


def max_row_values(lower: np.ndarray, upper: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Largest expected ``values`` over rows with entries in [lower, upper] summing to 1.

    Fractional knapsack per row: start every entry at its lower bound, then hand
    the remaining mass out in decreasing order of value up to each upper bound.
    """
    lower_sums = lower.sum(axis=-1)
    upper_sums = upper.sum(axis=-1)
    if np.any(lower_sums > 1.0 + FEASIBILITY_TOLERANCE) or np.any(
        upper_sums < 1.0 - FEASIBILITY_TOLERANCE
    ):
        raise ConfidenceSetInconsistency(
            "A confidence row admits no distribution: "
            f"max lower sum {float(lower_sums.max()):.6f}, "
            f"min upper sum {float(upper_sums.min()):.6f}."
        )
    order = np.argsort(-values, kind="stable")
    capacity = (upper - lower)[..., order]
    remaining = np.clip(1.0 - lower_sums, 0.0, None)[..., None]
    given_before = np.cumsum(capacity, axis=-1) - capacity
    given = np.clip(remaining - given_before, 0.0, capacity)
    return lower @ values + given @ values[order]


def upper_occupancy(
    confidence_set: TransitionConfidenceSet,
    policy: Policy,
    target: tuple[int, int, int],
) -> float:
    """Max over transitions in the set of the probability of visiting (s, a).

    ``target`` is ``(layer, state, action)``.
    """
    layer, state, action = target
    values = np.zeros(confidence_set.layer_sizes[layer])
    values[state] = 1.0
    for source_layer in range(layer - 1, -1, -1):
        row_values = max_row_values(
            confidence_set.lower[source_layer],
            confidence_set.upper[source_layer],
            values,
        )
        values = np.sum(policy.rows[source_layer] * row_values, axis=1)
    return float(policy.rows[layer][state, action] * values[0])
