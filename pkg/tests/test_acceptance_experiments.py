"""Slow seeded Monte Carlo experiments; set SF_RL_RUN_ACCEPTANCE=1 to run them."""

from __future__ import annotations

import logging
import os
import statistics
import unittest

import numpy as np
from scipy import stats

from experiment_service.environments import generate_env
from experiment_service.validation import (
    SuiteRun,
    admission_soundness,
    confidence_coverage,
    supermartingale_concentration,
    validate,
)
from sf_rl_core.learners import build_learner
from sf_rl_core.driver import run_sf_rl
from state_free_rl_shared import (
    CheckStatus,
    EnvFamilySpec,
    FamilyLossSpec,
    InjectionMode,
    LearnerName,
    LossKind,
    RunMode,
    SfRlConfig,
)

ACCEPTANCE_VAR = "SF_RL_RUN_ACCEPTANCE"
RUN_ACCEPTANCE = os.environ.get(ACCEPTANCE_VAR, "").strip() == "1"
SKIP_REASON = f"{ACCEPTANCE_VAR}=1 is required for slow acceptance experiments."

logger = logging.getLogger(__name__)


def _core(padded: list[int] | None, *, seed: int = 5, loss: FamilyLossSpec | None = None) -> EnvFamilySpec:
    return EnvFamilySpec(
        name="core",
        horizon=3,
        reachable_states=[3, 3, 2],
        padded_states=padded,
        actions=2,
        seed=seed,
        loss=loss or FamilyLossSpec(),
    )


def _final_regret(config: SfRlConfig, spec: EnvFamilySpec, seed: int) -> float:
    environment = generate_env(spec)
    run_log = run_sf_rl(config, environment.mdp, environment.losses, build_learner(config), seed=seed)
    return float(run_log.cumulative_expected_regret()[-1])


def _failed(checks) -> list[str]:
    return [check.name for check in checks if check.status != CheckStatus.PASSED]


@unittest.skipUnless(RUN_ACCEPTANCE, SKIP_REASON)
class StateCountIndependenceExperiment(unittest.TestCase):
    episodes = 100_000
    paddings = ([0, 0, 0], [11, 11, 10], [64, 64, 64])

    def test_sf_rl_regret_ignores_padding_while_full_space_ucbvi_pays_for_it(self) -> None:
        reduction = SfRlConfig(delta=0.1, episodes=self.episodes, learner=LearnerName.UCBVI)
        direct = reduction.model_copy(update={"mode": RunMode.DIRECT})

        reduced = [_final_regret(reduction, _core(padding), seed=1) for padding in self.paddings]
        baseline = [_final_regret(direct, _core(padding), seed=1) for padding in self.paddings]
        logger.info("Reduction regrets %s, full-space regrets %s.", reduced, baseline)

        spread = (max(reduced) - min(reduced)) / max(min(reduced), 1e-12)
        self.assertLess(spread, 0.05)
        self.assertTrue(all(left < right for left, right in zip(baseline, baseline[1:])), baseline)


@unittest.skipUnless(RUN_ACCEPTANCE, SKIP_REASON)
class SquareRootRegretShapeExperiment(unittest.TestCase):
    def _ratios(self, learner: LearnerName, largest_power: int) -> list[float]:
        config = SfRlConfig(
            delta=0.1,
            episodes=2**largest_power,
            learner=learner,
            mode=RunMode.DIRECT,
        )
        environment = generate_env(
            EnvFamilySpec(name="shape", horizon=2, reachable_states=[2, 2], actions=2, seed=3)
        )
        run_log = run_sf_rl(config, environment.mdp, environment.losses, build_learner(config), seed=0)
        regret = run_log.cumulative_expected_regret()
        return [float(regret[2**power - 1]) / 2 ** (power / 2) for power in range(10, largest_power + 1)]

    def _assert_no_growth(self, ratios: list[float]) -> None:
        self.assertLessEqual(ratios[-1], 1.2 * statistics.median(ratios[:-1]), ratios)

    def test_ucbvi(self) -> None:
        self._assert_no_growth(self._ratios(LearnerName.UCBVI, 17))

    def test_uob_reps(self) -> None:
        self._assert_no_growth(self._ratios(LearnerName.UOB_REPS, 17))


@unittest.skipUnless(RUN_ACCEPTANCE, SKIP_REASON)
class InjectedConfidenceExperiment(unittest.TestCase):
    episodes = 1_000
    seeds = range(20)

    def test_injected_sets_do_not_lose_to_restarts(self) -> None:
        loss = FamilyLossSpec(kind=LossKind.ADVERSARIAL, phases=4, period=50, episodes=self.episodes)
        restart = SfRlConfig(delta=0.1, episodes=self.episodes, learner=LearnerName.UOB_REPS)
        injected = restart.model_copy(update={"injection": InjectionMode.IMPROVED_SET})

        wins = ties = 0
        for seed in self.seeds:
            spec = _core(None, seed=seed, loss=loss)
            with_injection = _final_regret(injected, spec, seed)
            from_scratch = _final_regret(restart, spec, seed)
            if np.isclose(with_injection, from_scratch):
                ties += 1
            elif with_injection < from_scratch:
                wins += 1
        trials = len(self.seeds) - ties
        self.assertGreater(trials, 0)
        result = stats.binomtest(wins, trials, 0.5, alternative="greater")
        logger.info("Injection won %s of %s untied seeds (p=%.4f).", wins, trials, result.pvalue)
        self.assertLess(result.pvalue, 0.05)


@unittest.skipUnless(RUN_ACCEPTANCE, SKIP_REASON)
class MonteCarloSuiteExperiment(unittest.TestCase):
    def test_admission_soundness_over_500_runs(self) -> None:
        checks = admission_soundness(SuiteRun(trials=500, rng=np.random.default_rng(0), seed=0))

        self.assertFalse(_failed(checks))

    def test_confidence_coverage_over_1000_runs(self) -> None:
        checks = confidence_coverage(SuiteRun(trials=1000, rng=np.random.default_rng(0), seed=0))

        self.assertFalse(_failed(checks))

    def test_supermartingale_bounds_on_long_sequences(self) -> None:
        checks = supermartingale_concentration(
            SuiteRun(trials=10_000, rng=np.random.default_rng(0), seed=0),
            length=10_000,
        )

        self.assertFalse(_failed(checks))

    def test_bandit_degeneration_over_1000_steps(self) -> None:
        report = validate("bandit-degeneration", trials=1000, seed=0)

        self.assertTrue(report.passed, _failed(report.checks))


if __name__ == "__main__":
    unittest.main()
