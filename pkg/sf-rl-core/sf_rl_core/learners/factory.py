from __future__ import annotations

from state_free_rl_shared import LearnerName, SfRlConfig

from sf_rl_core.errors import ConfigurationError
from sf_rl_core.learners.base import EpisodicLearner
from sf_rl_core.learners.ucbvi import UcbviLearner
from sf_rl_core.learners.uob_reps import UobRepsLearner


def build_learner(config: SfRlConfig) -> EpisodicLearner:
    if config.learner == LearnerName.UCBVI:
        return UcbviLearner(episodes=config.episodes, bonus_constant=config.bonus_constant)
    if config.learner == LearnerName.UCBVI_ARRIVAL:
        return UcbviLearner(
            episodes=config.episodes,
            bonus_constant=config.bonus_constant,
            use_arrival_bonus=True,
        )
    if config.learner == LearnerName.UOB_REPS:
        return UobRepsLearner(episodes=config.episodes)
    raise ConfigurationError(f"Unknown learner: {config.learner}.")
