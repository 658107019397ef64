from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np

from experiment_fixtures import (
    chain_environment,
    family_environment,
    small_plan,
    weak_edge_environment,
    write_json,
    write_yaml,
)
from experiment_service.env_files import (
    load_environment,
    load_plan,
    resolve_entry,
)
from experiment_service.errors import EnvironmentFileError, PlanConfigurationError
from sf_rl_core.losses import PhasedLosses, ScheduledLosses, StochasticLosses, save_schedule
from state_free_rl_shared import EnvironmentEntry

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


class LoadEnvironmentTest(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.directory = Path(self._tmp.name)

    def test_explicit_yaml_environment(self) -> None:
        path = write_yaml(self.directory / "chain.yaml", chain_environment())

        environment = load_environment(path)

        self.assertEqual(environment.name, "chain")
        self.assertEqual(environment.mdp.layer_sizes, (1, 2, 2, 1))
        self.assertIsInstance(environment.losses, StochasticLosses)
        np.testing.assert_allclose(environment.losses.means[1], [[0.2, 0.8], [0.5, 0.5]])
        self.assertEqual(len(environment.reachable_states()), 4)

    def test_json_environment_parses_like_yaml(self) -> None:
        path = write_json(self.directory / "chain.json", chain_environment())

        environment = load_environment(path)

        self.assertEqual(environment.mdp.layer_sizes, (1, 2, 2, 1))

    def test_weak_edge_reach_is_its_best_policy_probability(self) -> None:
        environment = load_environment(write_yaml(self.directory / "weak.yaml", weak_edge_environment()))

        self.assertAlmostEqual(float(environment.reach[1][1]), 0.3)
        self.assertEqual(environment.reachable_states(epsilon=0.5), [(1, 0)])
        self.assertEqual(environment.reachable_states(epsilon=0.2), [(1, 0), (1, 1)])

    def test_family_environment_file(self) -> None:
        path = write_yaml(self.directory / "family.yaml", family_environment(padded=[3, 1]))

        environment = load_environment(path)

        self.assertEqual(environment.mdp.layer_sizes, (1, 5, 3, 1))
        self.assertEqual(len(environment.reachable_states()), 4)

    def test_phased_schedule(self) -> None:
        document = chain_environment()
        first = document["losses"]["means"]
        second = [[[1.0 - value for value in row] for row in layer] for layer in first]
        document["losses"] = {
            "kind": "adversarial",
            "schedule": {"kind": "phased", "period": 2, "episodes": 10, "tables": [first, second]},
        }

        environment = load_environment(write_yaml(self.directory / "phased.yaml", document))

        self.assertIsInstance(environment.losses, PhasedLosses)
        self.assertEqual(environment.losses.episodes, 10)

    def test_schedule_file_resolves_next_to_environment(self) -> None:
        rng = np.random.default_rng(0)
        schedule = ScheduledLosses(
            [
                np.zeros((6, 1, 2)),
                rng.uniform(size=(6, 2, 2)),
                rng.uniform(size=(6, 2, 2)),
            ]
        )
        (self.directory / "schedules").mkdir()
        save_schedule(self.directory / "schedules" / "chain.npz", schedule)
        document = chain_environment()
        document["losses"] = {
            "kind": "adversarial",
            "schedule": {"kind": "file", "path": "schedules/chain.npz"},
        }

        environment = load_environment(write_yaml(self.directory / "scheduled.yaml", document))

        self.assertIsInstance(environment.losses, ScheduledLosses)
        self.assertEqual(environment.losses.episodes, 6)
        np.testing.assert_array_equal(environment.losses.schedule[1], schedule.schedule[1])

    def test_missing_schedule_file(self) -> None:
        document = chain_environment()
        document["losses"] = {
            "kind": "adversarial",
            "schedule": {"kind": "file", "path": "absent.npz"},
        }

        with self.assertRaises(EnvironmentFileError):
            load_environment(write_yaml(self.directory / "scheduled.yaml", document))

    def test_corrupt_schedule_files(self) -> None:
        valid = self.directory / "valid.npz"
        save_schedule(
            valid,
            ScheduledLosses([np.zeros((4, 1, 2)), np.ones((4, 2, 2)), np.ones((4, 2, 2))]),
        )
        contents = {
            "garbage.npz": b"not a loss schedule",
            "truncated.npz": valid.read_bytes()[: valid.stat().st_size // 2],
        }
        for name, payload in contents.items():
            with self.subTest(name=name):
                (self.directory / name).write_bytes(payload)
                document = chain_environment()
                document["losses"] = {
                    "kind": "adversarial",
                    "schedule": {"kind": "file", "path": name},
                }

                with self.assertRaises(EnvironmentFileError) as caught:
                    load_environment(write_yaml(self.directory / "scheduled.yaml", document))

                self.assertTrue(caught.exception.details["path"].endswith(name))

    def test_rows_that_do_not_sum_to_one(self) -> None:
        document = chain_environment()
        document["transitions"][0] = [[[0.5, 0.2], [0.0, 1.0]]]

        with self.assertRaises(EnvironmentFileError):
            load_environment(write_yaml(self.directory / "broken.yaml", document))

    def test_schema_errors_are_listed(self) -> None:
        document = chain_environment()
        document["layer_sizes"] = [1, 2, 1]

        with self.assertRaises(EnvironmentFileError) as caught:
            load_environment(write_yaml(self.directory / "broken.yaml", document))

        self.assertIn("errors", caught.exception.details)

    def test_unknown_kind_and_missing_file(self) -> None:
        with self.assertRaises(EnvironmentFileError):
            load_environment(write_yaml(self.directory / "odd.yaml", {"kind": "tabular", "name": "x"}))
        with self.assertRaises(EnvironmentFileError):
            load_environment(self.directory / "absent.yaml")

    def test_entry_paths_resolve_against_base_directory(self) -> None:
        write_yaml(self.directory / "chain.yaml", chain_environment())

        environment = resolve_entry(
            EnvironmentEntry(name="chain", path="chain.yaml"),
            base_dir=self.directory,
        )

        self.assertEqual(environment.name, "chain")


class ShippedConfigTest(unittest.TestCase):
    def test_sample_environments_load(self) -> None:
        for name in ("core-family.yaml", "padded-family.yaml", "weak-edge.yaml"):
            with self.subTest(name=name):
                self.assertTrue(load_environment(CONFIG_DIR / name).reachable_states())

    def test_sample_plan_loads(self) -> None:
        plan = load_plan(CONFIG_DIR / "padding-sweep.yaml")

        self.assertEqual(len(plan.environments) * len(plan.algorithms) * len(plan.seeds), 30)
        for entry in plan.environments:
            resolve_entry(entry, base_dir=CONFIG_DIR)


class LoadPlanTest(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.directory = Path(self._tmp.name)

    def test_valid_plan(self) -> None:
        path = write_yaml(
            self.directory / "plan.yaml",
            small_plan(output_dir="out", environments=[{"name": "chain", "path": "chain.yaml"}]),
        )

        plan = load_plan(path)

        self.assertEqual(plan.output_dir, "out")
        self.assertEqual(plan.seeds, [1])

    def test_duplicate_seeds_are_rejected(self) -> None:
        path = write_yaml(
            self.directory / "plan.yaml",
            small_plan(
                output_dir="out",
                environments=[{"name": "chain", "path": "chain.yaml"}],
                seeds=[1, 1],
            ),
        )

        with self.assertRaises(PlanConfigurationError):
            load_plan(path)

    def test_unreadable_plan(self) -> None:
        with self.assertRaises(PlanConfigurationError):
            load_plan(self.directory / "absent.yaml")


if __name__ == "__main__":
    unittest.main()
