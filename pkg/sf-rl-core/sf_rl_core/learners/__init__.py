from sf_rl_core.learners.base import (
    ConfidenceInjectable,
    EpisodicLearner,
    LearnerSpace,
)
from sf_rl_core.learners.exp3_ix import Exp3IxReference
from sf_rl_core.learners.factory import build_learner
from sf_rl_core.learners.ucbvi import UcbviLearner
from sf_rl_core.learners.uob_reps import UobRepsLearner

__all__ = [
    "ConfidenceInjectable",
    "EpisodicLearner",
    "Exp3IxReference",
    "LearnerSpace",
    "UcbviLearner",
    "UobRepsLearner",
    "build_learner",
]
