"""Training-dynamics metrics, KL drift, the collapse-step detector and cost accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .rewards import majority_answer
from .space import TabularPolicy, kl_divergence


@dataclass(frozen=True)
class BatchRecord:
    """One training batch: ``M`` prompts with ``N`` rollouts each.

    ``pseudo_rewards`` defaults to the majority-vote indicator and
    ``oracle_rewards`` to exact match with the prompt's ground truth.
    """

    ground_truth: tuple
    answers: tuple[tuple, ...]
    pseudo_rewards: tuple[tuple[float, ...], ...]
    oracle_rewards: tuple[tuple[int, ...], ...]
    certainty: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        M = len(self.answers)
        if len(self.ground_truth) != M:
            raise ValueError("need one ground truth per prompt")
        if M:
            N = len(self.answers[0])
            rows = [self.answers, self.pseudo_rewards, self.oracle_rewards]
            if self.certainty is not None:
                rows.append(self.certainty)
            if N == 0 or any(len(r) != M or any(len(x) != N for x in r) for r in rows):
                raise ValueError("batch must be rectangular with N >= 1 rollouts per prompt")
        if any(v not in (0, 1) for row in self.oracle_rewards for v in row):
            raise ValueError("oracle rewards must be binary")

    @classmethod
    def from_rollouts(cls, answers: Sequence[Sequence[Hashable]], ground_truth: Sequence,
                      pseudo_rewards=None, certainty=None) -> "BatchRecord":
        answers = tuple(tuple(row) for row in answers)
        if pseudo_rewards is None:
            pseudo_rewards = []
            for row in answers:
                maj = majority_answer(row)
                pseudo_rewards.append(tuple(int(a == maj) for a in row))
        oracle = tuple(tuple(int(a == t) for a in row) for row, t in zip(answers, ground_truth))
        return cls(
            ground_truth=tuple(ground_truth),
            answers=answers,
            pseudo_rewards=tuple(tuple(r) for r in pseudo_rewards),
            oracle_rewards=oracle,
            certainty=None if certainty is None else tuple(tuple(c) for c in certainty),
        )

    @property
    def M(self) -> int:
        return len(self.answers)

    @property
    def N(self) -> int:
        return len(self.answers[0]) if self.answers else 0

    def majorities(self) -> list:
        return [majority_answer(row) for row in self.answers]

    def pseudo_is_binary(self) -> bool:
        return all(v in (0, 1) for row in self.pseudo_rewards for v in row)


def _nonempty(batch: BatchRecord):
    if batch.M == 0:
        raise ValueError("empty batch")


def label_accuracy(batch: BatchRecord) -> float:
    """Fraction of prompts whose majority-voted answer is the ground truth."""
    _nonempty(batch)
    return float(np.mean([m == t for m, t in zip(batch.majorities(), batch.ground_truth)]))


def reward_accuracy(batch: BatchRecord) -> float:
    """Fraction of rollouts whose pseudo-reward equals the oracle reward."""
    _nonempty(batch)
    if not batch.pseudo_is_binary():
        raise ValueError("reward accuracy needs binary pseudo-rewards")
    pseudo = np.asarray(batch.pseudo_rewards)
    oracle = np.asarray(batch.oracle_rewards)
    return float(np.mean(pseudo == oracle))


def gt_reward(batch: BatchRecord) -> float:
    _nonempty(batch)
    return float(np.mean(batch.oracle_rewards))


def mv_reward(batch: BatchRecord) -> float:
    _nonempty(batch)
    return float(np.mean(batch.pseudo_rewards))


def hacking_gap(batch: BatchRecord) -> float:
    """Mean pseudo-reward minus mean oracle reward."""
    return mv_reward(batch) - gt_reward(batch)


def certainty_label_accuracy(batch: BatchRecord) -> float:
    """Accuracy of the most confident rollout per prompt (lowest index wins ties)."""
    _nonempty(batch)
    if batch.certainty is None:
        raise ValueError("certainty scores missing")
    hits = []
    for scores, oracle in zip(batch.certainty, batch.oracle_rewards):
        hits.append(oracle[int(np.argmax(scores))])
    return float(np.mean(hits))


def model_collapse_step(trace: Sequence[float], threshold: float = 0.01) -> int | None:
    """1-based index of the first value strictly below ``threshold``."""
    if len(trace) == 0:
        raise ValueError("empty accuracy trace")
    for i, v in enumerate(trace, start=1):
        if v < threshold:
            return i
    return None


def kl_drift(policies, refs) -> float:
    """Mean over problems of the exact ``KL(pi || pi_ref)``."""
    if isinstance(policies, TabularPolicy):
        policies, refs = [policies], [refs]
    if len(policies) != len(refs) or not policies:
        raise ValueError("need one reference per policy")
    total = 0.0
    for pol, ref in zip(policies, refs):
        if not pol.same_space(ref):
            raise ValueError("policy and reference live on different spaces")
        total += kl_divergence(pol.probs(), ref.probs())
    return total / len(policies)


@dataclass(frozen=True)
class CostReport:
    indicator_tokens: int
    baseline_tokens: int

    @property
    def speedup(self) -> float:
        return self.baseline_tokens / self.indicator_tokens


def cost_report(collapse_steps: Sequence[int], batch: int, rollouts: int, response_len: int,
                baseline_problems: int, baseline_models: int, baseline_epochs: int = 1) -> CostReport:
    """Token budget of the collapse-step indicator versus full training runs.

    indicator = response_len * rollouts * sum(collapse_steps) * batch
    baseline  = response_len * rollouts * baseline_problems * baseline_models * baseline_epochs
    """
    counts = [batch, rollouts, response_len, baseline_problems, baseline_models, baseline_epochs]
    if any(c <= 0 for c in counts) or any(s <= 0 for s in collapse_steps):
        raise ValueError("all counts must be positive")
    baseline = response_len * rollouts * baseline_problems * baseline_models * baseline_epochs
    indicator = response_len * rollouts * sum(collapse_steps) * batch
    if indicator == 0:
        raise ValueError("no collapse steps supplied")
    return CostReport(indicator_tokens=indicator, baseline_tokens=baseline)
