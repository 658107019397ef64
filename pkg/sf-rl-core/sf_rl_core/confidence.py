from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from state_free_rl_shared import ConfidenceProvenance

from sf_rl_core.mdp import LayeredMdp, State
from sf_rl_core.pruned_space import PrunedSpace
from sf_rl_core.reachability import VisitStats

logger = logging.getLogger(__name__)

EMPTY_INTERSECTIONS = "empty_intersections"
LOWER_BOUND_REPAIRS = "lower_bound_repairs"

Interval = tuple[float, float]
UNINFORMATIVE: Interval = (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class TransitionConfidenceSet:
    """Per-entry intervals; ``lower[h]`` and ``upper[h]`` are shaped like the layer's transition."""

    lower: tuple[np.ndarray, ...]
    upper: tuple[np.ndarray, ...]
    provenance: ConfidenceProvenance
    diagnostics: dict[str, int] = field(default_factory=dict)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(layer.shape[0] for layer in self.lower) + (self.lower[-1].shape[2],)

    @property
    def n_actions(self) -> int:
        return int(self.lower[0].shape[1])

    @property
    def horizon(self) -> int:
        return len(self.lower) - 1


def _clamped(center: float, width: float) -> Interval:
    return max(0.0, center - width), min(1.0, center + width)


def baseline_width(
    empirical: ArrayLike,
    counts: ArrayLike,
    *,
    n_states: int,
    n_actions: int,
    episodes: int,
    delta: float,
) -> np.ndarray:
    """Empirical-Bernstein half-width; ``counts`` broadcasts against ``empirical``."""
    log_term = math.log(4.0 * max(episodes, 1) * n_states * n_actions / delta)
    denominator = np.maximum(1.0, np.asarray(counts, dtype=float) - 1.0)
    return 2.0 * np.sqrt(np.asarray(empirical, dtype=float) * log_term / denominator) + (
        14.0 * log_term / (3.0 * denominator)
    )


def build_baseline_set(
    pair_counts: Sequence[np.ndarray],
    transition_counts: Sequence[np.ndarray],
    *,
    n_states: int,
    n_actions: int,
    episodes: int,
    delta: float,
) -> TransitionConfidenceSet:
    lower, upper = [], []
    for counts, moves in zip(pair_counts, transition_counts):
        visits = counts[..., None].astype(float)
        empirical = moves / np.maximum(visits, 1.0)
        width = baseline_width(
            empirical,
            visits,
            n_states=n_states,
            n_actions=n_actions,
            episodes=episodes,
            delta=delta,
        )
        lo = np.where(visits > 0, np.clip(empirical - width, 0.0, 1.0), 0.0)
        hi = np.where(visits > 0, np.clip(empirical + width, 0.0, 1.0), 1.0)
        lower.append(lo)
        upper.append(hi)
    return TransitionConfidenceSet(
        lower=tuple(lower),
        upper=tuple(upper),
        provenance=ConfidenceProvenance.BASELINE,
    )


def allocate_confidence(
    source_index: int,
    target_index: int | None,
    *,
    n_actions: int,
    delta: float,
) -> tuple[float, float | None]:
    """Per-pair and per-triple confidence levels from arrival indices."""
    pair_level = delta / (4.0 * source_index**2 * n_actions)
    if target_index is None:
        return pair_level, None
    triple_level = delta / (4.0 * (source_index**4 + target_index**4) * n_actions)
    return pair_level, triple_level


def interval_one_width(empirical: float, denominator: float, log_term: float) -> float:
    return 4.0 * math.sqrt(empirical * log_term / denominator) + 20.0 * log_term / denominator


def interval_two_width(visited_before: int, log_term: float, denominator: float) -> float:
    return (2.0 * visited_before + 24.0 * log_term) / denominator


def improved_interval_1(
    stats: VisitStats,
    source: State,
    action: int,
    target: State,
    *,
    episode: int,
    triple_delta: float | None,
) -> Interval:
    """Partial-empirical interval over the episodes after both states arrived."""
    base = max(stats.arrival(source), stats.arrival(target))
    if math.isinf(base) or triple_delta is None:
        return UNINFORMATIVE
    layer, index = source
    counts = stats.pair_counts[layer][index, action]
    moves = stats.transition_counts[layer][index, action, target[1]]
    frozen = stats.counts_at(base)
    recent = counts - frozen.pair_counts[layer][index, action]
    recent_moves = moves - frozen.transition_counts[layer][index, action, target[1]]
    center = recent_moves / max(1, recent)
    denominator = max(recent - 1, 1)
    width = interval_one_width(center, denominator, math.log(episode / triple_delta))
    return _clamped(center, width)


def improved_interval_2(
    stats: VisitStats,
    source: State,
    action: int,
    target: State,
    *,
    episode: int,
    pair_delta: float | None,
) -> Interval:
    """Upper bound for successors that arrived strictly after their source."""
    source_arrival = stats.arrival(source)
    target_arrival = stats.arrival(target)
    if pair_delta is None or math.isinf(target_arrival) or target_arrival < source_arrival + 1:
        return UNINFORMATIVE
    layer, index = source
    counts = stats.counts_at(target_arrival).pair_counts[layer][index, action]
    denominator = max(counts - 1, 1)
    width = interval_two_width(
        stats.visited_before(target_arrival),
        math.log(episode / pair_delta),
        denominator,
    )
    return 0.0, min(1.0, width)


def _intersect(first: Interval, second: Interval) -> tuple[Interval, bool]:
    lo, hi = max(first[0], second[0]), min(first[1], second[1])
    if lo <= hi:
        return (lo, hi), False
    return (min(first[0], second[0]), max(first[1], second[1])), True


def build_improved_set(
    stats: VisitStats,
    space: PrunedSpace,
    episode: int,
    delta: float,
) -> TransitionConfidenceSet:
    """Intervals over the pruned space for ``episode``, from data through ``episode - 1``.

    Auxiliary rows are pinned to the absorbing point mass; the auxiliary column of
    admitted rows is left at [0, 1].
    """
    sizes = space.pruned_layer_sizes
    horizon = space.horizon
    n_actions = space.n_actions
    empty = 0
    repairs = 0
    lower, upper = [], []
    for layer in range(horizon + 1):
        lo = np.zeros((sizes[layer], n_actions, sizes[layer + 1]))
        hi = np.zeros_like(lo)
        targets = space.ordered[layer + 1]
        for local, real in enumerate(space.ordered[layer]):
            source = (layer, real)
            source_index = stats.allocation_order(source)
            for action in range(n_actions):
                if layer == horizon:
                    lo[local, action, 0] = hi[local, action, 0] = 1.0
                    continue
                for target_local, target_real in enumerate(targets):
                    target = (layer + 1, target_real)
                    if source_index is None:
                        interval = UNINFORMATIVE
                    else:
                        pair_delta, triple_delta = allocate_confidence(
                            source_index,
                            stats.allocation_order(target),
                            n_actions=n_actions,
                            delta=delta,
                        )
                        interval, was_empty = _intersect(
                            improved_interval_1(
                                stats,
                                source,
                                action,
                                target,
                                episode=episode,
                                triple_delta=triple_delta,
                            ),
                            improved_interval_2(
                                stats,
                                source,
                                action,
                                target,
                                episode=episode,
                                pair_delta=pair_delta,
                            ),
                        )
                        if was_empty:
                            empty += 1
                            logger.warning(
                                "Empty confidence intersection at episode %s for %s, action %s, successor %s.",
                                episode,
                                source,
                                action,
                                target,
                            )
                    lo[local, action, target_local], hi[local, action, target_local] = interval
                lo[local, action, len(targets)] = 0.0
                hi[local, action, len(targets)] = 1.0
                if lo[local, action].sum() > 1.0:
                    repairs += 1
                    logger.warning(
                        "Lower bounds of %s, action %s sum above one at episode %s; dropped.",
                        source,
                        action,
                        episode,
                    )
                    lo[local, action] = 0.0
        if layer >= 1:
            auxiliary = space.auxiliary_index(layer)
            next_auxiliary = 0 if layer == horizon else space.auxiliary_index(layer + 1)
            lo[auxiliary, :, next_auxiliary] = hi[auxiliary, :, next_auxiliary] = 1.0
        lower.append(lo)
        upper.append(hi)
    return TransitionConfidenceSet(
        lower=tuple(lower),
        upper=tuple(upper),
        provenance=ConfidenceProvenance.IMPROVED,
        diagnostics={EMPTY_INTERSECTIONS: empty, LOWER_BOUND_REPAIRS: repairs},
    )


def contains(
    confidence_set: TransitionConfidenceSet,
    transition: LayeredMdp,
    *,
    tolerance: float = 1e-12,
) -> bool:
    if tuple(transition.layer_sizes) != confidence_set.layer_sizes:
        raise ValueError("Confidence set and transition cover different layers.")
    return all(
        np.all(lo - tolerance <= table) and np.all(table <= hi + tolerance)
        for lo, hi, table in zip(
            confidence_set.lower, confidence_set.upper, transition.transitions
        )
    )
