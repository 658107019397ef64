from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import TypeVar

import numpy as np

from state_free_rl_shared import InjectionMode, RunMode, SfRlConfig

from sf_rl_core.confidence import build_improved_set
from sf_rl_core.errors import EpisodeOrderError, LearnerEpisodeError
from sf_rl_core.learners.base import ConfidenceInjectable, EpisodicLearner, LearnerSpace
from sf_rl_core.losses import LossModel
from sf_rl_core.mdp import LayeredMdp, State
from sf_rl_core.occupancy import best_in_hindsight, compute_occupancy, expected_loss
from sf_rl_core.pruned_space import PrunedSpace, extend_policy, prune_trajectory
from sf_rl_core.reachability import VisitStats, admission_test
from sf_rl_core.run_log import EpisodeRecord, RestartEvent, RunLog
from sf_rl_core.sampling import Trajectory, sample_trajectory

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class EpisodeOutcome:
    record: EpisodeRecord
    trajectory: Trajectory
    learner_trajectory: Trajectory | None


def restart_delta(delta: float, pruned_size: int) -> float:
    return delta / (2.0 * pruned_size**2)


class SfRlDriver:
    """Runs a base learner on the pruned space and restarts it whenever states are admitted.

    In direct mode the learner sees the full space and verbatim trajectories and
    nothing is ever admitted.
    """

    def __init__(
        self,
        *,
        config: SfRlConfig,
        mdp: LayeredMdp,
        losses: LossModel,
        learner: EpisodicLearner,
        rng: np.random.Generator,
    ) -> None:
        self.config = config
        self.mdp = mdp
        self.losses = losses
        self.learner = learner
        self.rng = rng
        self.space = PrunedSpace.initial(mdp.layer_sizes, mdp.n_actions)
        self.stats = VisitStats(mdp.layer_sizes, mdp.n_actions)
        self.confidence_stats = self.stats
        self.log = RunLog(config=config)
        self.last_episode = 0
        self._injecting = (
            config.mode == RunMode.SF_RL and config.injection == InjectionMode.IMPROVED_SET
        )
        if self._injecting and not isinstance(learner, ConfidenceInjectable):
            raise TypeError(f"{type(learner).__name__} does not accept confidence sets.")

        if self.direct:
            space = LearnerSpace(mdp.layer_sizes, mdp.n_actions)
            self._call_learner(lambda: learner.restart(space, delta=config.delta), episode=0)
            self.log.pruned_size = mdp.state_count
        else:
            self._restart_learner(episode=0)
            self.log.space_versions.append(self.space.snapshot())
            self.log.pruned_size = self.space.size

    @property
    def direct(self) -> bool:
        return self.config.mode == RunMode.DIRECT

    def run_episode(self, episode: int) -> EpisodeOutcome:
        if episode != self.last_episode + 1:
            raise EpisodeOrderError(f"Expected episode {self.last_episode + 1}, got {episode}.")
        self.losses.require_episode(episode)

        if self._injecting:
            confidence_set = build_improved_set(
                self.confidence_stats, self.space, episode, self.config.delta
            )
            for key, count in confidence_set.diagnostics.items():
                self.log.confidence_diagnostics[key] = (
                    self.log.confidence_diagnostics.get(key, 0) + count
                )
            self._call_learner(
                lambda: self.learner.inject_confidence_set(confidence_set),  # type: ignore[attr-defined]
                episode=episode,
            )

        learner_policy = self._call_learner(
            lambda: self.learner.propose_policy(episode), episode=episode
        )
        policy = learner_policy if self.direct else extend_policy(learner_policy, self.space, self.mdp)
        expected = expected_loss(compute_occupancy(self.mdp, policy), self.losses.table(episode))
        trajectory = sample_trajectory(self.mdp, policy, self.losses, episode, self.rng)

        if self.direct:
            self.stats.record_episode(trajectory, episode)
            self._call_learner(lambda: self.learner.observe(trajectory, episode), episode=episode)
            record = self._record(episode, trajectory, expected, trajectory.total_loss, ())
            return EpisodeOutcome(record=record, trajectory=trajectory, learner_trajectory=trajectory)

        pruned = prune_trajectory(trajectory, self.space)
        self.stats.record_episode(
            trajectory, episode, admitted=set(self.space.admitted_states())
        )
        if self.confidence_stats is not self.stats:
            self.confidence_stats.record_episode(trajectory, episode)

        admitted = self._admissions(trajectory, episode)
        learner_trajectory: Trajectory | None = None
        if admitted:
            self.space = self.space.with_admitted(admitted)
            self.log.space_versions.append(self.space.snapshot())
            self.log.pruned_size = self.space.size
            if self.config.reset_confidence_on_restart:
                self.confidence_stats = VisitStats(self.mdp.layer_sizes, self.mdp.n_actions)
            delta = self._restart_learner(episode=episode)
            self.log.restart_events.append(
                RestartEvent(
                    episode=episode,
                    admitted_states=admitted,
                    pruned_size=self.space.size,
                    learner_delta=delta,
                )
            )
            logger.info(
                "Episode %s admitted %s; restarted learner on %s states with delta %.3g.",
                episode,
                list(admitted),
                self.space.size,
                delta,
            )
        else:
            learner_trajectory = pruned
            self._call_learner(lambda: self.learner.observe(pruned, episode), episode=episode)

        record = self._record(episode, trajectory, expected, pruned.total_loss, admitted)
        return EpisodeOutcome(
            record=record, trajectory=trajectory, learner_trajectory=learner_trajectory
        )

    def run(self) -> RunLog:
        episodes = self.config.episodes
        self.losses.require_length(episodes)
        for episode in range(self.last_episode + 1, episodes + 1):
            self.run_episode(episode)
        self.finish()
        return self.log

    def finish(self) -> None:
        """Fills in the per-episode comparator and the visit audit."""
        episodes = self.last_episode
        self.log.unadmitted_visits = {
            (layer, int(index)): int(self.stats.unadmitted_visits[layer][index])
            for layer in range(1, self.mdp.horizon + 1)
            for index in np.flatnonzero(self.stats.unadmitted_visits[layer])
        }
        if episodes == 0:
            self.log.comparator_losses = np.zeros(0)
            return
        comparator, _ = best_in_hindsight(self.mdp, self.losses.summed_table(episodes))
        occupancy = compute_occupancy(self.mdp, comparator)
        self.log.comparator_losses = np.array(
            [expected_loss(occupancy, self.losses.table(t)) for t in range(1, episodes + 1)]
        )

    def _admissions(self, trajectory: Trajectory, episode: int) -> tuple[State, ...]:
        candidates = [state for state in trajectory.states() if not self.space.is_admitted(state)]
        return tuple(
            state
            for state in candidates
            if admission_test(
                self.stats,
                state,
                episode=episode,
                delta=self.config.delta,
                epsilon=self.config.epsilon,
                horizon=self.mdp.horizon,
                threshold_constant=self.config.threshold_constant,
            )
        )

    def _restart_learner(self, *, episode: int) -> float:
        delta = restart_delta(self.config.delta, self.space.size)
        space = LearnerSpace(self.space.pruned_layer_sizes, self.mdp.n_actions)
        self._call_learner(lambda: self.learner.restart(space, delta=delta), episode=episode)
        return delta

    def _record(
        self,
        episode: int,
        trajectory: Trajectory,
        expected: float,
        pruned_loss: float,
        admitted: tuple[State, ...],
    ) -> EpisodeRecord:
        record = EpisodeRecord(
            episode=episode,
            realized_loss=trajectory.total_loss,
            expected_loss=expected,
            pruned_realized_loss=pruned_loss,
            pruned_size=self.log.pruned_size,
            restarts=self.log.restarts,
            admitted=admitted,
        )
        self.log.records.append(record)
        self.last_episode = episode
        return record

    def _call_learner(self, call: Callable[[], T], *, episode: int) -> T:
        try:
            return call()
        except Exception as exc:
            raise LearnerEpisodeError(
                f"{type(self.learner).__name__} failed: {exc}", episode=episode
            ) from exc


def run_sf_rl(
    config: SfRlConfig,
    mdp: LayeredMdp,
    losses: LossModel,
    learner: EpisodicLearner,
    *,
    seed: int,
) -> RunLog:
    driver = SfRlDriver(
        config=config,
        mdp=mdp,
        losses=losses,
        learner=learner,
        rng=np.random.default_rng(seed),
    )
    return driver.run()

