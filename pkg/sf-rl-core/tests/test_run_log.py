from __future__ import annotations

import unittest

import numpy as np

from state_free_rl_shared import RunStatus, SfRlConfig

from sf_rl_core.run_log import (
    EpisodeRecord,
    RestartEvent,
    RunLog,
    checkpoint_rows,
    dyadic_checkpoints,
    summarize,
)


def _run_log() -> RunLog:
    config = SfRlConfig(delta=0.1, episodes=5)
    run_log = RunLog(config=config)
    realized = [1.0, 0.0, 2.0, 1.0, 1.0]
    expected = [0.9, 0.8, 0.7, 0.6, 0.5]
    for episode, (loss, mean) in enumerate(zip(realized, expected), start=1):
        run_log.records.append(
            EpisodeRecord(
                episode=episode,
                realized_loss=loss,
                expected_loss=mean,
                pruned_realized_loss=0.0,
                pruned_size=2 if episode < 3 else 4,
                restarts=0 if episode < 3 else 1,
            )
        )
    run_log.restart_events.append(
        RestartEvent(episode=3, admitted_states=((1, 0), (2, 1)), pruned_size=4, learner_delta=0.1 / 32)
    )
    run_log.comparator_losses = np.full(5, 0.5)
    run_log.pruned_size = 4
    return run_log


class DyadicCheckpointsTest(unittest.TestCase):
    def test_powers_of_two_and_the_last_episode(self) -> None:
        self.assertEqual(dyadic_checkpoints(10), [1, 2, 4, 8, 10])
        self.assertEqual(dyadic_checkpoints(8), [1, 2, 4, 8])
        self.assertEqual(dyadic_checkpoints(1), [1])
        self.assertEqual(dyadic_checkpoints(0), [])


class CheckpointRowsTest(unittest.TestCase):
    def test_cumulative_series(self) -> None:
        rows = checkpoint_rows(_run_log())

        self.assertEqual([row.episode for row in rows], [1, 2, 4, 5])
        last = rows[-1]
        self.assertAlmostEqual(last.cum_realized_loss, 5.0)
        self.assertAlmostEqual(last.cum_expected_regret, 1.0)
        self.assertAlmostEqual(last.cum_realized_regret, 2.5)
        self.assertEqual((last.pruned_size, last.restarts), (4, 1))
        self.assertAlmostEqual(rows[1].cum_realized_regret, 0.0)

    def test_requested_checkpoints_always_include_the_end(self) -> None:
        rows = checkpoint_rows(_run_log(), [3, 100])

        self.assertEqual([row.episode for row in rows], [3, 5])

    def test_empty_log(self) -> None:
        self.assertEqual(checkpoint_rows(RunLog(config=SfRlConfig(delta=0.1, episodes=0))), [])


class SummarizeTest(unittest.TestCase):
    def test_summary_echoes_the_run(self) -> None:
        summary = summarize(_run_log(), run_id="chain__ucbvi__seed1", environment="chain", algorithm="ucbvi", seed=1)

        self.assertEqual(summary.status, RunStatus.SUCCEEDED)
        self.assertEqual(summary.episodes, 5)
        self.assertAlmostEqual(summary.final_expected_regret, 1.0)
        self.assertAlmostEqual(summary.comparator_loss, 2.5)
        self.assertEqual(summary.restarts, 1)
        self.assertEqual(summary.pruned_size, 4)
        self.assertEqual([(ref.layer, ref.index) for ref in summary.admitted_states], [(1, 0), (2, 1)])
        self.assertEqual(summary.restart_timeline[0].episode, 3)
        self.assertEqual(summary.config.delta, 0.1)

    def test_empty_run_has_zero_regret(self) -> None:
        run_log = RunLog(config=SfRlConfig(delta=0.1, episodes=0))

        summary = summarize(run_log, run_id="x__ucbvi__seed0", environment="x", algorithm="ucbvi", seed=0)

        self.assertEqual(summary.final_expected_regret, 0.0)
        self.assertEqual(summary.final_realized_regret, 0.0)
        self.assertEqual(summary.restart_timeline, [])


if __name__ == "__main__":
    unittest.main()
