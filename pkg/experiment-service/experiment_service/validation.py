from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from state_free_rl_shared import (
    CheckStatus,
    ConfidenceProvenance,
    EnvFamilySpec,
    LearnerName,
    SfRlConfig,
    ValidationCheck,
    ValidationReport,
    ValidationSuite,
)
from state_free_rl_shared.time import utc_now

from sf_rl_core.confidence import TransitionConfidenceSet, build_improved_set, contains
from sf_rl_core.driver import SfRlDriver, run_sf_rl
from sf_rl_core.errors import ProjectionError
from sf_rl_core.learners import Exp3IxReference, LearnerSpace, UobRepsLearner, build_learner
from sf_rl_core.learners.projection import kl_project
from sf_rl_core.losses import StochasticLosses
from sf_rl_core.mdp import LayeredMdp, Policy, loss_table_from_layers
from sf_rl_core.occupancy import compute_occupancy, expected_loss
from sf_rl_core.pruned_space import (
    PrunedSpace,
    build_pruned_transition,
    extend_policy,
    prune_trajectory,
    pruned_loss,
    restrict_policy,
)
from sf_rl_core.reachability import (
    ConcentrationFamily,
    supermartingale_violation_rates,
    unadmitted_visit_bound,
)
from sf_rl_core.sampling import Trajectory, TrajectoryStep, draw_index, trajectory_distribution

from .environments import GeneratedEnvironment, generate_env
from .errors import UnknownSuiteError

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
SANDWICH_TOLERANCE = 1e-10
BANDIT_TOLERANCE = 1e-10
PROJECTION_TOLERANCE = 1e-5
REGRET_TOLERANCE = 1e-9
WIDTH_CONSTANT = 64.0

DEFAULT_TRIALS = {
    ValidationSuite.TRAJECTORY_EQUIVALENCE: 20,
    ValidationSuite.VALUE_GAP_SANDWICH: 100,
    ValidationSuite.ADMISSION_SOUNDNESS: 100,
    ValidationSuite.CONFIDENCE_COVERAGE: 100,
    ValidationSuite.SUPERMARTINGALE_CONCENTRATION: 2000,
    ValidationSuite.BANDIT_DEGENERATION: 200,
    ValidationSuite.CONFIDENCE_WIDTH: 5,
    ValidationSuite.EXACT_INVARIANTS: 50,
}


@dataclass(frozen=True)
class SuiteRun:
    trials: int
    rng: np.random.Generator
    seed: int


Suite = Callable[[SuiteRun], list[ValidationCheck]]


def resolve_suite(name: str | ValidationSuite) -> ValidationSuite:
    try:
        return ValidationSuite(name)
    except ValueError as exc:
        suites = [suite.value for suite in ValidationSuite]
        raise UnknownSuiteError(
            message=f"Unknown validation suite: {name}. Known suites: {', '.join(suites)}.",
            details={"suite": str(name), "suites": suites},
        ) from exc


def validate(
    suite: str | ValidationSuite,
    *,
    trials: int | None = None,
    seed: int = 0,
) -> ValidationReport:
    """Runs one named suite; failing checks are report entries, not exceptions."""
    resolved = resolve_suite(suite)
    count = DEFAULT_TRIALS[resolved] if trials is None else trials
    checks = SUITES[resolved](SuiteRun(trials=count, rng=np.random.default_rng(seed), seed=seed))
    passed = all(check.status == CheckStatus.PASSED for check in checks)
    logger.info(
        "Suite %s %s (%s checks, %s trials, seed %s).",
        resolved.value,
        "passed" if passed else "failed",
        len(checks),
        count,
        seed,
    )
    return ValidationReport(
        suite=resolved,
        passed=passed,
        seed=seed,
        trials=count,
        checks=checks,
        created_at=utc_now(),
    )


def binomial_allowance(rate: float, trials: int) -> float:
    """``rate`` plus three binomial standard errors."""
    return rate + 3.0 * math.sqrt(rate * (1.0 - rate) / max(trials, 1))


def _check(
    name: str,
    passed: bool,
    *,
    measured: float,
    tolerance: float,
    **details: object,
) -> ValidationCheck:
    return ValidationCheck(
        name=name,
        status=CheckStatus.PASSED if passed else CheckStatus.FAILED,
        measured=float(measured),
        tolerance=float(tolerance),
        details=details,
    )


def random_policy(layer_sizes: tuple[int, ...], n_actions: int, rng: np.random.Generator) -> Policy:
    return Policy(
        tuple(rng.dirichlet(np.ones(n_actions), size=size) for size in layer_sizes[:-1])
    )


def random_instance(rng: np.random.Generator) -> tuple[GeneratedEnvironment, PrunedSpace]:
    """Small H=3 environment with at most three states per layer and a strict pruned subset."""
    spec = EnvFamilySpec(
        name="fixture",
        horizon=3,
        reachable_states=[int(count) for count in rng.integers(1, 4, size=3)],
        actions=2,
        seed=int(rng.integers(0, 2**31)),
    )
    environment = generate_env(spec)
    states = [
        (layer, index)
        for layer in range(1, spec.horizon + 1)
        for index in range(environment.mdp.layer_sizes[layer])
    ]
    admitted = [state for state in states if rng.random() < 0.5]
    if len(admitted) == len(states):
        admitted.pop(int(rng.integers(len(admitted))))
    space = PrunedSpace.initial(environment.mdp.layer_sizes, spec.actions).with_admitted(admitted)
    return environment, space


def trajectory_equivalence(run: SuiteRun) -> list[ValidationCheck]:
    worst_probability = 0.0
    worst_loss = 0.0
    for _ in range(run.trials):
        environment, space = random_instance(run.rng)
        mdp = environment.mdp
        table = environment.losses.table(1)
        pruned_policy = restrict_policy(random_policy(mdp.layer_sizes, mdp.n_actions, run.rng), space)
        executed = extend_policy(pruned_policy, space, mdp)

        collapsed: dict[object, list] = {}
        for (start_action, path), mass in trajectory_distribution(mdp, executed, table).items():
            trajectory = Trajectory(
                start_action=start_action,
                steps=tuple(
                    TrajectoryStep(state=state, action=action, loss=loss)
                    for (state, action), loss in zip(path, mass.expected_losses)
                ),
            )
            pruned = prune_trajectory(trajectory, space)
            entry = collapsed.setdefault(
                pruned.path(), [0.0, tuple(step.loss for step in pruned.steps)]
            )
            entry[0] += mass.probability

        direct = trajectory_distribution(
            build_pruned_transition(mdp, space), pruned_policy, pruned_loss(table, space)
        )
        for key in set(collapsed) | set(direct):
            sampled = collapsed.get(key, [0.0, None])
            exact = direct.get(key)
            exact_probability = exact.probability if exact else 0.0
            worst_probability = max(worst_probability, abs(sampled[0] - exact_probability))
            if exact is not None and sampled[1] is not None:
                worst_loss = max(
                    worst_loss,
                    max(abs(a - b) for a, b in zip(sampled[1], exact.expected_losses)),
                )
    return [
        _check(
            "pruned-trajectory-law",
            worst_probability < EXACT_TOLERANCE,
            measured=worst_probability,
            tolerance=EXACT_TOLERANCE,
            instances=run.trials,
        ),
        _check(
            "pruned-step-losses",
            worst_loss < EXACT_TOLERANCE,
            measured=worst_loss,
            tolerance=EXACT_TOLERANCE,
        ),
    ]


def value_gap_sandwich(run: SuiteRun) -> list[ValidationCheck]:
    lowest_gap = math.inf
    worst_excess = -math.inf
    for _ in range(run.trials):
        environment, space = random_instance(run.rng)
        mdp = environment.mdp
        table = environment.losses.table(1)
        pruned_policy = restrict_policy(random_policy(mdp.layer_sizes, mdp.n_actions, run.rng), space)
        q = compute_occupancy(mdp, extend_policy(pruned_policy, space, mdp))
        pruned_value = expected_loss(
            compute_occupancy(build_pruned_transition(mdp, space), pruned_policy),
            pruned_loss(table, space),
        )
        gap = expected_loss(q, table) - pruned_value
        escaped = sum(
            float(q.state_mass(layer)[index])
            for layer in range(1, mdp.horizon + 1)
            for index in range(mdp.layer_sizes[layer])
            if not space.is_admitted((layer, index))
        )
        lowest_gap = min(lowest_gap, gap)
        worst_excess = max(worst_excess, gap - mdp.horizon * escaped)
    return [
        _check(
            "gap-nonnegative",
            lowest_gap >= -SANDWICH_TOLERANCE,
            measured=lowest_gap,
            tolerance=SANDWICH_TOLERANCE,
            instances=run.trials,
        ),
        _check(
            "gap-below-escape-mass",
            worst_excess <= SANDWICH_TOLERANCE,
            measured=worst_excess,
            tolerance=SANDWICH_TOLERANCE,
            instances=run.trials,
        ),
    ]


def soundness_fixture(rare_probability: float = 0.05) -> tuple[LayeredMdp, StochasticLosses]:
    """H=2; layer-1 state 1 is reached with ``rare_probability`` under every policy."""
    mdp = LayeredMdp(
        layer_sizes=(1, 2, 1, 1),
        n_actions=2,
        transitions=(
            np.array([[[1.0 - rare_probability, rare_probability]] * 2]),
            np.ones((2, 2, 1)),
            np.ones((1, 2, 1)),
        ),
    )
    losses = StochasticLosses(
        loss_table_from_layers(mdp.layer_sizes, 2, [[[0.3, 0.6], [0.5, 0.2]], [[0.4, 0.7]]])
    )
    return mdp, losses


def admission_soundness(
    run: SuiteRun,
    *,
    episodes: int = 200,
    delta: float = 0.1,
) -> list[ValidationCheck]:
    rare_probability = 0.05
    epsilon = 2.0 * rare_probability
    mdp, losses = soundness_fixture(rare_probability)
    config = SfRlConfig(delta=delta, epsilon=epsilon, episodes=episodes, learner=LearnerName.UCBVI)
    bound = unadmitted_visit_bound(episodes=episodes, delta=delta, epsilon=epsilon, horizon=mdp.horizon)
    rare_admissions = 0
    complete_runs = 0
    worst_visits = 0
    for trial in range(run.trials):
        run_log = run_sf_rl(config, mdp, losses, build_learner(config), seed=run.seed + trial)
        admitted = set(run_log.admitted_states())
        rare_admissions += (1, 1) in admitted
        complete_runs += {(1, 0), (2, 0)} <= admitted
        worst_visits = max(worst_visits, max(run_log.unadmitted_visits.values(), default=0))
    allowance = binomial_allowance(delta, run.trials)
    return [
        _check(
            "sub-epsilon-admission-rate",
            rare_admissions / run.trials <= allowance,
            measured=rare_admissions / run.trials,
            tolerance=allowance,
            epsilon=epsilon,
            episodes=episodes,
        ),
        _check(
            "reachable-states-admitted",
            1.0 - complete_runs / run.trials <= allowance,
            measured=1.0 - complete_runs / run.trials,
            tolerance=allowance,
        ),
        _check(
            "unadmitted-visit-bound",
            worst_visits <= bound,
            measured=worst_visits,
            tolerance=bound,
        ),
    ]


def coverage_environment() -> GeneratedEnvironment:
    return generate_env(
        EnvFamilySpec(
            name="coverage",
            horizon=2,
            reachable_states=[2, 2],
            actions=2,
            transition_concentration=2.0,
            seed=3,
        )
    )


def confidence_coverage(
    run: SuiteRun,
    *,
    episodes: int = 60,
    delta: float = 0.1,
) -> list[ValidationCheck]:
    environment = coverage_environment()
    config = SfRlConfig(delta=delta, episodes=episodes, learner=LearnerName.UCBVI)
    failures = 0
    for trial in range(run.trials):
        driver = SfRlDriver(
            config=config,
            mdp=environment.mdp,
            losses=environment.losses,
            learner=build_learner(config),
            rng=np.random.default_rng(run.seed + trial),
        )
        covered = True
        for episode in range(1, episodes + 1):
            confidence_set = build_improved_set(driver.confidence_stats, driver.space, episode, delta)
            covered = covered and contains(
                confidence_set, build_pruned_transition(environment.mdp, driver.space)
            )
            driver.run_episode(episode)
        failures += not covered
    allowance = binomial_allowance(delta, run.trials)
    return [
        _check(
            "improved-set-coverage",
            failures / run.trials <= allowance,
            measured=failures / run.trials,
            tolerance=allowance,
            episodes=episodes,
        )
    ]


def supermartingale_concentration(
    run: SuiteRun,
    *,
    length: int = 2000,
) -> list[ValidationCheck]:
    checks = []
    for delta in (0.01, 0.05):
        allowance = binomial_allowance(delta, run.trials)
        for family in ConcentrationFamily:
            upper, lower = supermartingale_violation_rates(
                family, delta=delta, length=length, trials=run.trials, rng=run.rng
            )
            for side, rate in (("upper", upper), ("lower", lower)):
                checks.append(
                    _check(
                        f"{family.value}-{side}-delta-{delta}",
                        rate <= allowance,
                        measured=rate,
                        tolerance=allowance,
                        length=length,
                    )
                )
    return checks


def bandit_degeneration(
    run: SuiteRun,
    *,
    n_actions: int = 3,
    delta: float = 0.1,
) -> list[ValidationCheck]:
    steps = run.trials
    losses = run.rng.random((steps, n_actions))
    learner = UobRepsLearner(episodes=steps)
    learner.restart(LearnerSpace((1, 1, 1), n_actions), delta=delta)
    reference = Exp3IxReference(n_actions=n_actions, delta=delta)
    worst = 0.0
    for episode in range(1, steps + 1):
        policy = learner.propose_policy(episode)
        expected = reference.propose_policy()
        worst = max(worst, float(np.max(np.abs(policy.rows[1][0] - expected))))
        action = draw_index(expected, run.rng)
        loss = float(losses[episode - 1, action])
        learner.observe(
            Trajectory(start_action=0, steps=(TrajectoryStep(0, action, loss),)),
            episode,
        )
        reference.observe(action, loss)
    return [
        _check(
            "exp3-ix-agreement",
            worst <= BANDIT_TOLERANCE,
            measured=worst,
            tolerance=BANDIT_TOLERANCE,
            steps=steps,
        )
    ]


def width_ratios(
    confidence_set: TransitionConfidenceSet,
    driver: SfRlDriver,
    *,
    reachable: int,
    episodes: int,
    delta: float,
) -> tuple[float, float]:
    """Worst width-to-rate ratio over informed admitted triples, and the widest auxiliary row."""
    space = driver.space
    truth = build_pruned_transition(driver.mdp, space)
    log_term = math.log(reachable * space.n_actions * episodes / delta)
    worst_ratio = 0.0
    auxiliary_width = 0.0
    for layer in range(space.horizon + 1):
        widths = confidence_set.upper[layer] - confidence_set.lower[layer]
        targets = len(space.ordered[layer + 1])
        for local, real in enumerate(space.ordered[layer]):
            for action in range(space.n_actions):
                visits = int(driver.stats.pair_counts[layer][real, action])
                if visits < 2:
                    continue
                for target in range(targets):
                    probability = float(truth.transitions[layer][local, action, target])
                    rate = math.sqrt(probability * log_term / visits) + (reachable + log_term) / visits
                    worst_ratio = max(worst_ratio, float(widths[local, action, target]) / rate)
        if layer >= 1:
            auxiliary_width = max(
                auxiliary_width, float(np.max(widths[space.auxiliary_index(layer)]))
            )
    return worst_ratio, auxiliary_width


def confidence_width(
    run: SuiteRun,
    *,
    episodes: int = 400,
    delta: float = 0.1,
) -> list[ValidationCheck]:
    environment = generate_env(
        EnvFamilySpec(
            name="width",
            horizon=2,
            reachable_states=[2, 2],
            padded_states=[2, 2],
            actions=2,
            transition_concentration=5.0,
            seed=7,
        )
    )
    reachable = len(environment.reachable_states())
    config = SfRlConfig(delta=delta, episodes=episodes, learner=LearnerName.UCBVI)
    worst_ratio = 0.0
    auxiliary_width = 0.0
    for trial in range(run.trials):
        driver = SfRlDriver(
            config=config,
            mdp=environment.mdp,
            losses=environment.losses,
            learner=build_learner(config),
            rng=np.random.default_rng(run.seed + trial),
        )
        driver.run()
        confidence_set = build_improved_set(driver.stats, driver.space, episodes + 1, delta)
        ratio, width = width_ratios(
            confidence_set, driver, reachable=reachable, episodes=episodes, delta=delta
        )
        worst_ratio = max(worst_ratio, ratio)
        auxiliary_width = max(auxiliary_width, width)
    return [
        _check(
            "width-within-rate",
            worst_ratio <= WIDTH_CONSTANT,
            measured=worst_ratio,
            tolerance=WIDTH_CONSTANT,
            episodes=episodes,
        ),
        _check(
            "auxiliary-rows-pinned",
            auxiliary_width == 0.0,
            measured=auxiliary_width,
            tolerance=0.0,
        ),
    ]


def _interval_set(mdp: LayeredMdp, width: float) -> TransitionConfidenceSet:
    return TransitionConfidenceSet(
        lower=tuple(np.clip(layer - width, 0.0, 1.0) for layer in mdp.transitions),
        upper=tuple(np.clip(layer + width, 0.0, 1.0) for layer in mdp.transitions),
        provenance=ConfidenceProvenance.BASELINE,
    )


def projection_violation(mdp: LayeredMdp, rng: np.random.Generator) -> float:
    """Largest flow or interval violation after projecting a perturbed occupancy."""
    confidence_set = _interval_set(mdp, 0.2)
    q = compute_occupancy(mdp, random_policy(mdp.layer_sizes, mdp.n_actions, rng))
    perturbed = [
        pairs[..., None] * table * np.exp(rng.normal(0.0, 0.5, size=table.shape)) + 1e-3
        for pairs, table in zip(q.layers, mdp.transitions)
    ]
    try:
        projected = kl_project(perturbed, confidence_set)
    except ProjectionError as exc:
        logger.warning("Projection did not converge: %s", exc.diagnostics)
        return math.inf
    violation = abs(float(projected[0].sum()) - 1.0)
    for layer in range(1, len(projected)):
        inflow = projected[layer - 1].sum(axis=(0, 1))
        outflow = projected[layer].sum(axis=(1, 2))
        violation = max(violation, float(np.max(np.abs(outflow - inflow))))
    for layer, triples in enumerate(projected):
        pairs = triples.sum(axis=2, keepdims=True)
        informed = pairs[..., 0] > 1e-3
        conditional = triples / np.where(pairs > 0.0, pairs, 1.0)
        below = confidence_set.lower[layer] - conditional
        above = conditional - confidence_set.upper[layer]
        violation = max(
            violation,
            float(np.max(below[informed], initial=0.0)),
            float(np.max(above[informed], initial=0.0)),
        )
    return violation


def padding_invariance(seed: int, *, episodes: int = 100) -> tuple[float, float]:
    """Bonus and regret differences of arrival-bonus UCBVI between a core and its padded copy."""
    config = SfRlConfig(delta=0.1, episodes=episodes, learner=LearnerName.UCBVI_ARRIVAL)
    bonuses = []
    regrets = []
    for padding in ([0, 0], [6, 6]):
        environment = generate_env(
            EnvFamilySpec(
                name="padding",
                horizon=2,
                reachable_states=[2, 2],
                padded_states=padding,
                actions=2,
                seed=seed,
            )
        )
        learner = build_learner(config)
        run_log = run_sf_rl(config, environment.mdp, environment.losses, learner, seed=seed)
        bonuses.append(learner.bonuses())
        regrets.append(float(run_log.cumulative_expected_regret()[-1]))
    bonus_gap = max(
        float(np.max(np.abs(core - padded))) if core.shape == padded.shape else math.inf
        for core, padded in zip(*bonuses)
    )
    return bonus_gap, abs(regrets[0] - regrets[1])


def exact_invariants(run: SuiteRun) -> list[ValidationCheck]:
    normalization = 0.0
    stochasticity = 0.0
    for _ in range(run.trials):
        environment, space = random_instance(run.rng)
        mdp = environment.mdp
        policy = random_policy(mdp.layer_sizes, mdp.n_actions, run.rng)
        totals = compute_occupancy(mdp, policy).layer_totals()
        normalization = max(normalization, max(abs(total - 1.0) for total in totals))
        pruned = build_pruned_transition(mdp, space)
        stochasticity = max(
            stochasticity,
            max(float(np.max(np.abs(table.sum(axis=2) - 1.0))) for table in pruned.transitions),
        )

    projections = min(run.trials, 5)
    projection = max(
        projection_violation(random_instance(run.rng)[0].mdp, run.rng) for _ in range(projections)
    )
    bonus_gap, regret_gap = padding_invariance(run.seed)
    return [
        _check(
            "occupancy-normalization",
            normalization <= EXACT_TOLERANCE,
            measured=normalization,
            tolerance=EXACT_TOLERANCE,
        ),
        _check(
            "pruned-row-stochasticity",
            stochasticity <= EXACT_TOLERANCE,
            measured=stochasticity,
            tolerance=EXACT_TOLERANCE,
        ),
        _check(
            "projection-feasibility",
            projection <= PROJECTION_TOLERANCE,
            measured=projection,
            tolerance=PROJECTION_TOLERANCE,
            projections=projections,
        ),
        _check(
            "arrival-bonus-padding-equality",
            bonus_gap == 0.0,
            measured=bonus_gap,
            tolerance=0.0,
        ),
        _check(
            "sf-rl-regret-padding-equality",
            regret_gap <= REGRET_TOLERANCE,
            measured=regret_gap,
            tolerance=REGRET_TOLERANCE,
        ),
    ]


SUITES: dict[ValidationSuite, Suite] = {
    ValidationSuite.TRAJECTORY_EQUIVALENCE: trajectory_equivalence,
    ValidationSuite.VALUE_GAP_SANDWICH: value_gap_sandwich,
    ValidationSuite.ADMISSION_SOUNDNESS: admission_soundness,
    ValidationSuite.CONFIDENCE_COVERAGE: confidence_coverage,
    ValidationSuite.SUPERMARTINGALE_CONCENTRATION: supermartingale_concentration,
    ValidationSuite.BANDIT_DEGENERATION: bandit_degeneration,
    ValidationSuite.CONFIDENCE_WIDTH: confidence_width,
    ValidationSuite.EXACT_INVARIANTS: exact_invariants,
}
