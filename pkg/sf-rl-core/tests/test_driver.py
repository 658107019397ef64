from __future__ import annotations

import unittest

import numpy as np

from state_free_rl_shared import InjectionMode, LearnerName, RunMode, SfRlConfig

from sf_rl_core.confidence import EMPTY_INTERSECTIONS, LOWER_BOUND_REPAIRS
from sf_rl_core.driver import SfRlDriver, restart_delta, run_sf_rl
from sf_rl_core.errors import EpisodeOrderError, LearnerEpisodeError
from sf_rl_core.learners import UcbviLearner, build_learner
from sf_rl_core.losses import PhasedLosses, StochasticLosses
from sf_rl_core.mdp import loss_table_from_layers
from sf_rl_fixtures import (
    RecordingLearner,
    chain_losses,
    chain_mdp,
    padded_losses,
    padded_mdp,
    single_path_mdp,
)


def _single_path_losses() -> StochasticLosses:
    return StochasticLosses(loss_table_from_layers((1, 1, 1, 1), 1, [[[0.5]], [[0.5]]]))


def _driver(config: SfRlConfig, learner, *, mdp=None, losses=None, seed: int = 0) -> SfRlDriver:
    return SfRlDriver(
        config=config,
        mdp=mdp or padded_mdp(),
        losses=losses or padded_losses(),
        learner=learner,
        rng=np.random.default_rng(seed),
    )


class RunEpisodeTest(unittest.TestCase):
    def test_first_episode_prunes_to_auxiliary_steps(self) -> None:
        learner = RecordingLearner()
        driver = _driver(SfRlConfig(delta=0.1, episodes=5), learner)

        outcome = driver.run_episode(1)

        self.assertEqual(outcome.record.restarts, 0)
        self.assertEqual(outcome.record.pruned_realized_loss, 0.0)
        self.assertIsNotNone(outcome.learner_trajectory)
        self.assertTrue(all(step.auxiliary for step in outcome.learner_trajectory.steps))
        self.assertTrue(all(step.state == 0 and step.loss == 0.0 for step in outcome.learner_trajectory.steps))
        space, delta = learner.restarts[0]
        self.assertEqual(space.layer_sizes, (1, 1, 1, 1))
        self.assertAlmostEqual(delta, 0.1 / 8)

    def test_restart_when_the_threshold_is_crossed(self) -> None:
        # With delta 0.03 and H=2 a state visited every episode passes at episode 12.
        learner = RecordingLearner()
        driver = _driver(
            SfRlConfig(delta=0.03, episodes=15),
            learner,
            mdp=single_path_mdp(),
            losses=_single_path_losses(),
        )

        run_log = driver.run()

        self.assertEqual(run_log.restarts, 1)
        event = run_log.restart_events[0]
        self.assertEqual(event.episode, 12)
        self.assertEqual(event.admitted_states, ((1, 0), (2, 0)))
        self.assertEqual(event.pruned_size, 4)
        self.assertAlmostEqual(event.learner_delta, 0.03 / (2 * 4**2))
        self.assertEqual(learner.restarts[-1][0].layer_sizes, (1, 2, 2, 1))
        self.assertEqual([episode for _, episode, _ in learner.observed], [*range(1, 12), 13, 14, 15])
        self.assertEqual([record.pruned_size for record in run_log.records[10:13]], [2, 4, 4])

    def test_admitted_states_reach_the_learner_verbatim(self) -> None:
        learner = RecordingLearner()
        driver = _driver(
            SfRlConfig(delta=0.03, episodes=14),
            learner,
            mdp=single_path_mdp(),
            losses=_single_path_losses(),
        )

        run_log = driver.run()

        _, _, trajectory = learner.observed[-1]
        self.assertFalse(any(step.auxiliary for step in trajectory.steps))
        self.assertEqual(trajectory.total_loss, run_log.records[-1].realized_loss)
        self.assertEqual(run_log.records[-1].pruned_realized_loss, run_log.records[-1].realized_loss)

    def test_learner_failures_carry_the_episode(self) -> None:
        driver = _driver(SfRlConfig(delta=0.1, episodes=5), RecordingLearner(fail_at=3))

        with self.assertRaises(LearnerEpisodeError) as raised:
            driver.run()

        self.assertEqual(raised.exception.episode, 3)
        self.assertIn("learner exploded", str(raised.exception))
        self.assertIn("(episode 3)", str(raised.exception))

    def test_episodes_run_in_order(self) -> None:
        driver = _driver(SfRlConfig(delta=0.1, episodes=5), RecordingLearner())

        with self.assertRaises(EpisodeOrderError):
            driver.run_episode(2)


class RunTest(unittest.TestCase):
    def test_zero_episodes_give_an_empty_log(self) -> None:
        run_log = run_sf_rl(
            SfRlConfig(delta=0.1, episodes=0), padded_mdp(), padded_losses(), RecordingLearner(), seed=0
        )

        self.assertEqual(run_log.episodes, 0)
        self.assertEqual(run_log.restarts, 0)
        self.assertEqual(run_log.comparator_losses.size, 0)
        self.assertEqual(run_log.pruned_size, 2)

    def test_learner_never_sees_non_admitted_states(self) -> None:
        learner = RecordingLearner()
        run_log = _driver(SfRlConfig(delta=0.1, episodes=200), learner, seed=3).run()

        versions = {index + 1: snapshot for index, snapshot in enumerate(run_log.space_versions)}
        for restart_count, _, trajectory in learner.observed:
            snapshot = versions[restart_count]
            for layer, step in enumerate(trajectory.steps, start=1):
                admitted = snapshot.admitted[layer - 1]
                if step.auxiliary:
                    self.assertEqual(step.state, len(admitted))
                    self.assertEqual(step.loss, 0.0)
                else:
                    self.assertLess(step.state, len(admitted))
        self.assertNotIn((1, 2), run_log.admitted_states())
        self.assertNotIn((2, 2), run_log.admitted_states())

    def test_run_log_invariants(self) -> None:
        run_log = _driver(SfRlConfig(delta=0.1, episodes=300), RecordingLearner(), seed=4).run()

        restarts = [record.restarts for record in run_log.records]
        sizes = [record.pruned_size for record in run_log.records]
        self.assertEqual(restarts, sorted(restarts))
        self.assertEqual(sizes, sorted(sizes))
        self.assertLessEqual(run_log.restarts, len(run_log.admitted_states()) + 1)
        for record in run_log.records:
            self.assertLessEqual(record.pruned_realized_loss, record.realized_loss)
        self.assertEqual(len(run_log.admitted_states()), 4)
        self.assertEqual(run_log.pruned_size, 6)

    def test_heavy_pessimism_never_restarts(self) -> None:
        episodes = 100
        run_log = _driver(
            SfRlConfig(delta=0.1, epsilon=1.0, episodes=episodes), RecordingLearner(), seed=2
        ).run()

        self.assertEqual(run_log.restarts, 0)
        regret = run_log.cumulative_expected_regret()[-1]
        self.assertLessEqual(regret, 2 * episodes)
        self.assertGreater(sum(run_log.unadmitted_visits.values()), 0)

    def test_comparator_is_the_best_fixed_policy(self) -> None:
        episodes = 6
        losses = PhasedLosses([chain_losses()], period=1, episodes=episodes)

        run_log = _driver(
            SfRlConfig(delta=0.1, episodes=episodes, mode=RunMode.DIRECT),
            RecordingLearner(),
            mdp=chain_mdp(),
            losses=losses,
        ).run()

        np.testing.assert_allclose(run_log.comparator_losses, np.full(episodes, 0.2))
        self.assertTrue(np.all(run_log.cumulative_expected_regret() >= -1e-12))

    def test_direct_mode_hands_over_the_full_space(self) -> None:
        learner = RecordingLearner()

        run_log = _driver(
            SfRlConfig(delta=0.1, episodes=20, mode=RunMode.DIRECT), learner, seed=1
        ).run()

        self.assertEqual(len(learner.restarts), 1)
        self.assertEqual(learner.restarts[0][0].layer_sizes, (1, 3, 3, 1))
        self.assertEqual(learner.restarts[0][1], 0.1)
        self.assertEqual(run_log.restarts, 0)
        self.assertEqual(len(learner.observed), 20)
        self.assertEqual(run_log.pruned_size, 6)

    def test_ucbvi_on_the_pruned_space(self) -> None:
        config = SfRlConfig(delta=0.1, episodes=150, learner=LearnerName.UCBVI)

        run_log = run_sf_rl(config, padded_mdp(), padded_losses(), build_learner(config), seed=9)

        self.assertEqual(run_log.episodes, 150)
        self.assertGreaterEqual(run_log.restarts, 1)
        self.assertEqual(restart_delta(0.1, run_log.pruned_size), run_log.restart_events[-1].learner_delta)

    def test_improved_set_injection(self) -> None:
        config = SfRlConfig(
            delta=0.1,
            episodes=40,
            learner=LearnerName.UOB_REPS,
            injection=InjectionMode.IMPROVED_SET,
        )

        run_log = run_sf_rl(config, padded_mdp(), padded_losses(), build_learner(config), seed=5)

        self.assertEqual(run_log.episodes, 40)
        self.assertEqual(
            set(run_log.confidence_diagnostics), {EMPTY_INTERSECTIONS, LOWER_BOUND_REPAIRS}
        )

    def test_injection_needs_a_learner_that_accepts_sets(self) -> None:
        config = SfRlConfig(
            delta=0.1,
            episodes=5,
            learner=LearnerName.UOB_REPS,
            injection=InjectionMode.IMPROVED_SET,
        )

        with self.assertRaises(TypeError):
            _driver(config, UcbviLearner(episodes=5))

    def test_confidence_counts_can_reset_on_restart(self) -> None:
        config = SfRlConfig(
            delta=0.03,
            episodes=13,
            learner=LearnerName.UOB_REPS,
            injection=InjectionMode.IMPROVED_SET,
            reset_confidence_on_restart=True,
        )
        driver = _driver(
            config,
            build_learner(config),
            mdp=single_path_mdp(),
            losses=_single_path_losses(),
        )

        driver.run()

        self.assertIsNot(driver.confidence_stats, driver.stats)
        self.assertEqual(driver.confidence_stats.last_episode, 13)
        self.assertEqual(driver.confidence_stats.visit_count((1, 0)), 1)
        self.assertEqual(driver.stats.visit_count((1, 0)), 13)


class LongUobRepsRunTest(unittest.TestCase):
    """Hundreds of consecutive projections on the reachable [2, 2] core."""

    def _run(self, **overrides) -> None:
        config = SfRlConfig(delta=0.1, episodes=400, learner=LearnerName.UOB_REPS, **overrides)
        for seed in range(3):
            with self.subTest(seed=seed):
                run_log = run_sf_rl(
                    config, padded_mdp(), padded_losses(), build_learner(config), seed=seed
                )

                self.assertEqual(run_log.episodes, 400)

    def test_sf_rl_mode(self) -> None:
        self._run()

    def test_direct_mode(self) -> None:
        self._run(mode=RunMode.DIRECT)

    def test_improved_set_injection(self) -> None:
        self._run(injection=InjectionMode.IMPROVED_SET)


if __name__ == "__main__":
    unittest.main()
