from __future__ import annotations

import unittest

import numpy as np

from sf_rl_core.errors import ConfigurationError
from sf_rl_core.losses import StochasticLosses
from sf_rl_core.mdp import LayeredMdp, Policy, loss_table_from_layers
from sf_rl_core.occupancy import best_in_hindsight
from sf_rl_core.pruned_space import (
    DEFAULT_ACTION,
    PrunedSpace,
    build_pruned_transition,
    extend_policy,
    prune_trajectory,
    pruned_loss,
    restrict_policy,
)
from sf_rl_core.sampling import Trajectory, TrajectoryStep, sample_trajectory
from sf_rl_fixtures import padded_losses, padded_mdp, random_losses, random_mdp


def _fully_admitted(mdp: LayeredMdp) -> PrunedSpace:
    space = PrunedSpace.initial(mdp.layer_sizes, mdp.n_actions)
    return space.with_admitted(
        state for layer in range(1, mdp.horizon + 1) for state in mdp.states(layer)
    )


class PrunedSpaceTest(unittest.TestCase):
    def test_initial_space_holds_only_auxiliary_states(self) -> None:
        space = PrunedSpace.initial((1, 3, 3, 1), 2)

        self.assertEqual(space.pruned_layer_sizes, (1, 1, 1, 1))
        self.assertEqual(space.size, 2)
        self.assertEqual(space.admitted_states(), [])
        self.assertEqual(space.version, 0)

    def test_admission_grows_the_space_and_bumps_the_version(self) -> None:
        space = PrunedSpace.initial((1, 3, 3, 1), 2)

        grown = space.with_admitted([(2, 1), (1, 2), (2, 0)])

        self.assertEqual(grown.version, 1)
        self.assertEqual(grown.admitted_states(), [(1, 2), (2, 0), (2, 1)])
        self.assertEqual(grown.pruned_layer_sizes, (1, 2, 3, 1))
        self.assertEqual(grown.local_index((2, 1)), 1)
        self.assertEqual(grown.auxiliary_index(2), 2)
        self.assertIsNone(grown.real_index(2, 2))
        self.assertIs(grown.with_admitted([(2, 0)]), grown)

    def test_rejects_states_outside_the_loss_bearing_layers(self) -> None:
        space = PrunedSpace.initial((1, 3, 3, 1), 2)

        with self.assertRaises(ConfigurationError):
            space.with_admitted([(0, 0)])
        with self.assertRaises(ConfigurationError):
            space.with_admitted([(1, 3)])
        with self.assertRaises(ConfigurationError):
            space.local_index((1, 0))

    def test_snapshot(self) -> None:
        space = PrunedSpace.initial((1, 3, 3, 1), 2).with_admitted([(1, 1)])

        snapshot = space.snapshot()

        self.assertEqual(snapshot.version, 1)
        self.assertEqual(snapshot.admitted, [[1], []])
        self.assertEqual(snapshot.size, 3)


class PrunedTransitionTest(unittest.TestCase):
    def test_full_admission_keeps_the_real_transition(self) -> None:
        mdp = padded_mdp()
        space = _fully_admitted(mdp)

        pruned = build_pruned_transition(mdp, space)

        for layer in range(mdp.horizon):
            sources, targets = mdp.layer_sizes[layer], mdp.layer_sizes[layer + 1]
            np.testing.assert_allclose(
                pruned.transitions[layer][:sources, :, :targets], mdp.transitions[layer]
            )
            np.testing.assert_allclose(
                pruned.transitions[layer][:sources, :, targets], 0.0, atol=1e-15
            )

    def test_missing_successor_mass_goes_to_the_auxiliary_state(self) -> None:
        mdp = LayeredMdp(
            layer_sizes=(1, 1, 2, 1),
            n_actions=1,
            transitions=(
                np.ones((1, 1, 1)),
                np.array([[[0.3, 0.7]]]),
                np.ones((2, 1, 1)),
            ),
        )
        space = PrunedSpace.initial(mdp.layer_sizes, 1).with_admitted([(1, 0), (2, 0)])

        pruned = build_pruned_transition(mdp, space)

        np.testing.assert_allclose(pruned.transitions[1][0, 0], [0.3, 0.7])

    def test_auxiliary_rows_are_absorbing(self) -> None:
        mdp = padded_mdp()
        space = PrunedSpace.initial(mdp.layer_sizes, 2).with_admitted([(1, 0)])

        pruned = build_pruned_transition(mdp, space)

        auxiliary = space.auxiliary_index(1)
        np.testing.assert_array_equal(pruned.transitions[1][auxiliary], [[1.0], [1.0]])
        np.testing.assert_array_equal(pruned.transitions[2][space.auxiliary_index(2)], [[1.0], [1.0]])
        # Only state (1, 0) is admitted, so the start row sends everything else to s_1 auxiliary.
        np.testing.assert_allclose(pruned.transitions[0][0], [[0.5, 0.5], [1.0, 0.0]])


class PrunedLossTest(unittest.TestCase):
    def test_admitted_pairs_keep_their_losses(self) -> None:
        mdp = padded_mdp()
        table = padded_losses().table(1)
        space = PrunedSpace.initial(mdp.layer_sizes, 2).with_admitted([(1, 1), (2, 0)])

        pruned = pruned_loss(table, space)

        np.testing.assert_allclose(pruned[1], [[0.6, 0.2], [0.0, 0.0]])
        np.testing.assert_allclose(pruned[2], [[0.3, 0.4], [0.0, 0.0]])

    def test_admissions_never_lower_the_best_pruned_value(self) -> None:
        for seed in range(10):
            with self.subTest(seed=seed):
                rng = np.random.default_rng(seed)
                mdp = random_mdp(rng)
                losses = random_losses(rng, mdp)
                states = [
                    state for layer in range(1, mdp.horizon + 1) for state in mdp.states(layer)
                ]
                order = rng.permutation(len(states))
                space = PrunedSpace.initial(mdp.layer_sizes, mdp.n_actions)
                values = []
                for index in order:
                    _, value = best_in_hindsight(
                        build_pruned_transition(mdp, space), pruned_loss(losses, space)
                    )
                    values.append(value)
                    space = space.with_admitted([states[index]])
                _, full_value = best_in_hindsight(mdp, losses)
                _, last_value = best_in_hindsight(
                    build_pruned_transition(mdp, space), pruned_loss(losses, space)
                )
                values.append(last_value)

                self.assertEqual(values[0], 0.0)
                self.assertTrue(
                    all(later >= earlier - 1e-12 for earlier, later in zip(values, values[1:])),
                    values,
                )
                self.assertAlmostEqual(values[-1], full_value, places=12)

    def test_zero_losses_stay_zero(self) -> None:
        mdp = padded_mdp()
        zero = loss_table_from_layers(mdp.layer_sizes, 2, [np.zeros((3, 2)), np.zeros((3, 2))])

        pruned = pruned_loss(zero, _fully_admitted(mdp))

        self.assertTrue(all(not layer.any() for layer in pruned))


class PruneTrajectoryTest(unittest.TestCase):
    def test_everything_admitted_keeps_the_trajectory(self) -> None:
        mdp = padded_mdp()
        space = _fully_admitted(mdp)
        trajectory = Trajectory(
            start_action=0,
            steps=(TrajectoryStep(1, 0, 0.5), TrajectoryStep(2, 1, 0.25)),
        )

        self.assertEqual(prune_trajectory(trajectory, space), trajectory)

    def test_leaving_the_space_switches_to_auxiliary_steps(self) -> None:
        layer_sizes = (1, 2, 2, 2, 1)
        space = PrunedSpace.initial(layer_sizes, 2).with_admitted([(1, 0), (3, 0)])
        trajectory = Trajectory(
            start_action=1,
            steps=(
                TrajectoryStep(0, 1, 0.5),
                TrajectoryStep(1, 1, 0.3),
                TrajectoryStep(0, 1, 0.2),
            ),
        )

        pruned = prune_trajectory(trajectory, space)

        self.assertEqual(
            pruned.steps,
            (
                TrajectoryStep(0, 1, 0.5),
                TrajectoryStep(0, DEFAULT_ACTION, 0.0, auxiliary=True),
                TrajectoryStep(1, DEFAULT_ACTION, 0.0, auxiliary=True),
            ),
        )
        self.assertEqual(pruned.start_action, 1)

    def test_first_state_outside_prunes_every_step(self) -> None:
        space = PrunedSpace.initial((1, 2, 2, 1), 2)
        trajectory = Trajectory(start_action=0, steps=(TrajectoryStep(1, 1, 0.9), TrajectoryStep(0, 0, 0.4)))

        pruned = prune_trajectory(trajectory, space)

        self.assertTrue(all(step.auxiliary and step.loss == 0.0 for step in pruned.steps))
        self.assertEqual(pruned.total_loss, 0.0)


class PolicyExtensionTest(unittest.TestCase):
    def test_non_admitted_states_take_the_default_action(self) -> None:
        mdp = padded_mdp()
        space = PrunedSpace.initial(mdp.layer_sizes, 2).with_admitted([(1, 1)])
        pruned_policy = Policy.deterministic([np.array([1]), np.array([1, 1]), np.array([1])], 2)

        extended = extend_policy(pruned_policy, space, mdp)

        np.testing.assert_array_equal(extended.rows[1], [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(extended.rows[0], [[0.0, 1.0]])
        np.testing.assert_array_equal(extended.rows[2][:, DEFAULT_ACTION], np.ones(3))

    def test_full_admission_is_the_identity(self) -> None:
        mdp = padded_mdp()
        space = _fully_admitted(mdp)
        policy = Policy(tuple(np.random.default_rng(2).dirichlet([1.0, 1.0], size=size) for size in mdp.layer_sizes[:-1]))

        extended = extend_policy(restrict_policy(policy, space), space, mdp)

        for original, roundtrip in zip(policy.rows, extended.rows):
            np.testing.assert_allclose(original, roundtrip)

    def test_sampled_trajectories_inside_the_space_round_trip(self) -> None:
        mdp = padded_mdp()
        space = PrunedSpace.initial(mdp.layer_sizes, 2).with_admitted([(1, 0), (1, 1), (2, 0), (2, 1)])
        policy = extend_policy(restrict_policy(Policy.uniform(mdp.layer_sizes, 2), space), space, mdp)
        losses = StochasticLosses(padded_losses().means)
        rng = np.random.default_rng(4)

        for episode in range(1, 30):
            trajectory = sample_trajectory(mdp, policy, losses, episode, rng)
            pruned = prune_trajectory(trajectory, space)
            self.assertFalse(any(step.auxiliary for step in pruned.steps))
            real = [space.real_index(layer, step.state) for layer, step in enumerate(pruned.steps, start=1)]
            self.assertEqual(real, [step.state for step in trajectory.steps])


if __name__ == "__main__":
    unittest.main()
