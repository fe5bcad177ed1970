"""Desk-scale lab for intrinsic-reward sharpening in label-free RL fine-tuning.

Tabular policies over enumerated trajectory spaces, intrinsic reward
estimators and their cross-entropy form, the closed-form sharpening map,
a REINFORCE toy trainer, training metrics and a Countdown verifier.
"""

__version__ = "0.1.0"

from .dynamics import (DynamicsParams, DynamicsState, optimal_policy, p_maj_star,
                       simulate_recurrence)
from .metrics import BatchRecord, cost_report, model_collapse_step
from .space import (AnswerSpace, ProbabilityVector, RolloutSet, TabularPolicy, Trajectory,
                    sample_rollouts)
from .trainer import TrainConfig, train
from .unified import RewardConfig, instantiate, unified_reward

__all__ = [
    "AnswerSpace", "BatchRecord", "DynamicsParams", "DynamicsState", "ProbabilityVector",
    "RewardConfig", "RolloutSet", "TabularPolicy", "TrainConfig", "Trajectory", "cost_report",
    "instantiate", "model_collapse_step", "optimal_policy", "p_maj_star", "sample_rollouts",
    "simulate_recurrence", "train", "unified_reward", "__version__",
]
