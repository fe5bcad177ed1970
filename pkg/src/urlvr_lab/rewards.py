"""Intrinsic reward estimators: certainty-based and ensemble-based."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .space import RolloutSet, Trajectory, floored_log, sort_answers


def _check(traj: Trajectory):
    if len(traj) == 0:
        raise ValueError("empty trajectory")


def self_certainty(traj: Trajectory) -> float:
    """Mean over steps of KL(U || pi_t); non-negative."""
    _check(traj)
    total = 0.0
    for dist in traj.step_dists:
        V = len(dist)
        total += float(np.mean(-np.log(V) - floored_log(dist.array)))
    return total / len(traj)


def token_entropy_reward(traj: Trajectory) -> float:
    """Negative mean Shannon entropy of the step distributions."""
    _check(traj)
    total = 0.0
    for dist in traj.step_dists:
        p = dist.array
        total += float(-np.sum(p * floored_log(p)))
    return -total / len(traj)


def trajectory_entropy_reward(traj: Trajectory) -> float:
    """Mean log-probability of the realized tokens."""
    _check(traj)
    return float(np.mean(floored_log(traj.realized_probs())))


def log_probability(traj: Trajectory) -> float:
    _check(traj)
    return float(np.sum(floored_log(traj.realized_probs())))


def probability_reward(traj: Trajectory) -> float:
    """Sequence probability, accumulated in the log domain."""
    return float(np.exp(log_probability(traj)))


def probability_disparity_reward(traj: Trajectory, answer_span) -> float:
    """Mean top-1 minus top-2 probability over the answer span.

    ``answer_span`` is a ``range`` or a ``(start, stop)`` pair of step indices;
    the normalizer is the span length.
    """
    span = range(*answer_span) if isinstance(answer_span, tuple) else answer_span
    if len(span) == 0:
        raise ValueError("answer span is empty")
    if span.step != 1 or span.start < 0 or span.stop > len(traj):
        raise ValueError(f"answer span {span} outside trajectory of length {len(traj)}")
    gaps = []
    for t in span:
        p = traj.step_dists[t].array
        if len(p) < 2:
            raise ValueError("probability disparity needs at least two outcomes per step")
        top2 = np.partition(p, -2)[-2:]
        gaps.append(top2[1] - top2[0])
    return float(np.mean(gaps))


@dataclass(frozen=True)
class VotingOutcome:
    majority_answer: Hashable
    counts: dict
    per_rollout_rewards: tuple[int, ...]

    @property
    def majority_count(self) -> int:
        return self.counts[self.majority_answer]


def majority_answer(answers) -> Hashable:
    """Most frequent answer; ties go to the smallest identifier."""
    counts = Counter(answers)
    if not counts:
        raise ValueError("no answers to vote on")
    best = max(counts.values())
    return sort_answers(a for a, c in counts.items() if c == best)[0]


def majority_vote(rollouts: RolloutSet) -> VotingOutcome:
    answers = rollouts.answers
    if not answers:
        raise ValueError("empty rollout set")
    maj = majority_answer(answers)
    return VotingOutcome(
        majority_answer=maj,
        counts=dict(Counter(answers)),
        per_rollout_rewards=tuple(int(a == maj) for a in answers),
    )


def empo_reward(rollouts: RolloutSet) -> list[float]:
    """Per-rollout cluster frequency ``|C(y)| / G`` with exact-answer clusters."""
    answers = rollouts.answers
    if not answers:
        raise ValueError("empty rollout set")
    counts = Counter(answers)
    G = len(answers)
    return [counts[a] / G for a in answers]
