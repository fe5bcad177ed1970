"""Stochastic policy-gradient training over tabular softmax policies.

Each step samples rollouts from the current policy of every problem,
scores them with an intrinsic (or ground-truth) reward, and applies
REINFORCE with an optional group-mean baseline and an exact KL penalty
toward the initial policy. ``global_batch // mini_batch`` updates are made
per sampling round on the same rollouts, so a smaller mini-batch means
staler rewards (the on-policy case is ``mini_batch == global_batch``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .dynamics import p_maj_star, trajectory_rewards
from .rewards import majority_vote, empo_reward
from .space import AnswerSpace, RolloutSet, TabularPolicy, entropy, make_policy, sample_rollouts

REWARD_KINDS = ("majority", "ground-truth", "self-certainty", "token-entropy",
                "trajectory-entropy", "probability", "empo")


@dataclass(frozen=True)
class TrainConfig:
    reward_kind: str = "majority"
    n_rollouts: int = 8
    global_batch: int = 1
    mini_batch: int = 1
    learning_rate: float = 0.1
    kl_coef: float = 0.0
    temperature: float = 1.0
    steps: int = 50
    seed: int = 0
    baseline: str = "group-mean"

    def __post_init__(self):
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        for name in ("n_rollouts", "global_batch", "mini_batch", "steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.global_batch % self.mini_batch:
            raise ValueError("mini_batch must divide global_batch")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.kl_coef < 0:
            raise ValueError("kl_coef must be non-negative")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.baseline not in ("group-mean", "none"):
            raise ValueError(f"unknown baseline {self.baseline!r}")

    @property
    def updates_per_step(self) -> int:
        return self.global_batch // self.mini_batch


@dataclass(frozen=True)
class StepRecord:
    step: int
    p_maj: tuple[float, ...]
    mean_reward: float
    gt_reward: float | None
    reward_accuracy: float | None
    label_accuracy: float | None
    actor_entropy: float
    kl_drift: float
    majority_flips: int
    eta_hat: float | None


@dataclass
class TrainTrace:
    records: list[StepRecord] = field(default_factory=list)
    majorities: list[tuple] = field(default_factory=list)
    final_policies: list[TabularPolicy] = field(default_factory=list)
    history: list[list[TabularPolicy]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def p_maj(self, problem: int = 0) -> list[float]:
        return [r.p_maj[problem] for r in self.records]

    @property
    def total_flips(self) -> int:
        return sum(r.majority_flips for r in self.records)


# --- gradients -------------------------------------------------------------


def advantages(rewards, baseline: str = "group-mean") -> np.ndarray:
    r = np.asarray(rewards, dtype=float)
    return r - r.mean() if baseline == "group-mean" else r


def _log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    m = z.max()
    return z - m - np.log(np.sum(np.exp(z - m)))


def surrogate_objective(logits, indices, adv, ref_logits=None, kl_coef: float = 0.0) -> float:
    """``mean_i A_i log pi(y_i) - kl_coef * KL(pi || pi_ref)`` at ``logits``."""
    logp = _log_softmax(logits)
    value = float(np.mean(np.asarray(adv) * logp[np.asarray(indices)]))
    if kl_coef:
        p = np.exp(logp)
        value -= kl_coef * float(np.sum(p * (logp - _log_softmax(ref_logits))))
    return value


def policy_gradient(logits, indices, adv, ref_logits=None, kl_coef: float = 0.0) -> np.ndarray:
    """Analytic gradient of ``surrogate_objective`` with respect to the logits."""
    logp = _log_softmax(logits)
    p = np.exp(logp)
    adv = np.asarray(adv, dtype=float)
    grad = np.zeros_like(p)
    np.add.at(grad, np.asarray(indices), adv)
    grad = (grad - adv.sum() * p) / len(adv)
    if kl_coef:
        log_ratio = logp - _log_softmax(ref_logits)
        grad -= kl_coef * p * (log_ratio - float(np.sum(p * log_ratio)))
    return grad


def expected_gradient(logits, rewards, ref_logits=None, kl_coef: float = 0.0) -> np.ndarray:
    """Exact gradient of ``E_pi[r] - kl_coef * KL(pi || pi_ref)`` over the table."""
    logp = _log_softmax(logits)
    p = np.exp(logp)
    r = np.asarray(rewards, dtype=float)
    grad = p * (r - np.dot(p, r))
    if kl_coef:
        log_ratio = logp - _log_softmax(ref_logits)
        grad -= kl_coef * p * (log_ratio - float(np.sum(p * log_ratio)))
    return grad


def gradient_step(policy: TabularPolicy, rollouts: RolloutSet, rewards, config: TrainConfig,
                  ref: TabularPolicy | None = None) -> TabularPolicy:
    rewards = np.asarray(rewards, dtype=float)
    if len(rewards) != len(rollouts):
        raise ValueError("rewards and rollouts differ in length")
    if config.kl_coef and ref is None:
        raise ValueError("KL penalty needs a reference policy")
    if config.kl_coef and not np.all(np.isfinite(ref.logits)):
        raise ValueError("KL penalty needs a reference with full support")
    adv = advantages(rewards, config.baseline)
    grad = policy_gradient(policy.logits, rollouts.indices, adv,
                           None if ref is None else ref.logits, config.kl_coef)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite policy gradient")
    return policy.with_logits(policy.logits + config.learning_rate * grad)


def fixed_reward_replay(policy: TabularPolicy, rewards, updates: int, config: TrainConfig,
                        ref: TabularPolicy | None = None) -> TabularPolicy:
    """Repeated exact-gradient ascent against a frozen per-trajectory reward.

    With ``kl_coef = beta > 0`` the fixed point is ``optimal_policy(ref, rewards, beta)``.
    """
    if updates < 1:
        raise ValueError("updates must be at least 1")
    ref = policy if ref is None else ref
    r = np.asarray(rewards, dtype=float)
    if r.shape != (len(policy),):
        raise ValueError("need one frozen reward per trajectory")
    logits = np.array(policy.logits)
    for _ in range(updates):
        grad = expected_gradient(logits, r, ref.logits, config.kl_coef)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite policy gradient")
        logits = logits + config.learning_rate * grad
    return policy.with_logits(logits)


# --- training loop -----------------------------------------------------------


def rollout_rewards(kind: str, policy: TabularPolicy, rollouts: RolloutSet, space: AnswerSpace) -> np.ndarray:
    if kind == "majority":
        return np.array(majority_vote(rollouts).per_rollout_rewards, dtype=float)
    if kind == "ground-truth":
        if space.ground_truth is None:
            raise ValueError("ground-truth reward needs a ground-truth answer")
        return np.array([a == space.ground_truth for a in rollouts.answers], dtype=float)
    if kind == "empo":
        return np.array(empo_reward(rollouts))
    table = trajectory_rewards(policy, kind)
    return table[np.asarray(rollouts.indices)]


def _p_star(p: float, kl_coef: float) -> float:
    return p_maj_star(p, kl_coef) if kl_coef > 0 else 1.0


def train(config: TrainConfig, problems: Sequence[tuple[TabularPolicy, AnswerSpace]],
          keep_policies: bool = False) -> TrainTrace:
    if not problems:
        raise ValueError("need at least one problem")
    rng = np.random.default_rng(config.seed)
    refs = [p for p, _ in problems]
    spaces = [s for _, s in problems]
    policies = list(refs)
    trace = TrainTrace()
    prev_majs = None
    for step in range(1, config.steps + 1):
        rollout_sets = [sample_rollouts(pol, config.n_rollouts, config.temperature, rng) for pol in policies]
        reward_sets = [rollout_rewards(config.reward_kind, pol, ro, sp)
                       for pol, ro, sp in zip(policies, rollout_sets, spaces)]
        majs = tuple(majority_vote(ro).majority_answer for ro in rollout_sets)
        p_before = tuple(float(pol.probs()[pol.answer_mask(m)].sum()) for pol, m in zip(policies, majs))

        batch = metrics.BatchRecord.from_rollouts(
            [ro.answers for ro in rollout_sets],
            [sp.ground_truth for sp in spaces],
            pseudo_rewards=None if config.reward_kind == "majority" else [list(r) for r in reward_sets],
            certainty=None if config.reward_kind in ("majority", "ground-truth") else [list(r) for r in reward_sets],
        )
        have_truth = all(sp.ground_truth is not None for sp in spaces)
        gt = metrics.gt_reward(batch) if have_truth else None
        if config.reward_kind == "majority":
            racc = metrics.reward_accuracy(batch) if have_truth else None
            lacc = metrics.label_accuracy(batch) if have_truth else None
        elif config.reward_kind == "ground-truth":
            racc = 1.0 if have_truth else None
            lacc = metrics.label_accuracy(batch) if have_truth else None
        else:
            racc = metrics.reward_accuracy(batch) if have_truth and batch.pseudo_is_binary() else None
            lacc = metrics.certainty_label_accuracy(batch) if have_truth else None
        mean_reward = float(np.mean([r.mean() for r in reward_sets]))
        flips = 0 if prev_majs is None else sum(a != b for a, b in zip(majs, prev_majs))
        prev_majs = majs

        updated = []
        for pol, ro, rew, ref in zip(policies, rollout_sets, reward_sets, refs):
            new = pol
            for _ in range(config.updates_per_step):
                new = gradient_step(new, ro, rew, config, ref)
            updated.append(new)

        etas = []
        for pol, new, m, p in zip(policies, updated, majs, p_before):
            p_after = float(new.probs()[new.answer_mask(m)].sum())
            gap = _p_star(p, config.kl_coef) - p
            if gap > 1e-15:
                etas.append((p_after - p) / gap)
        policies = updated

        trace.records.append(StepRecord(
            step=step,
            p_maj=p_before,
            mean_reward=mean_reward,
            gt_reward=gt,
            reward_accuracy=racc,
            label_accuracy=lacc,
            actor_entropy=float(np.mean([entropy(p.probs()) for p in policies])),
            kl_drift=metrics.kl_drift(policies, refs),
            majority_flips=flips,
            eta_hat=float(np.mean(etas)) if etas else None,
        ))
        trace.majorities.append(majs)
        if keep_policies:
            trace.history.append(policies)
    trace.final_policies = policies
    return trace


def make_problem(rng: np.random.Generator, n_answers: int = 6, traj_per_answer: int = 3,
                 leader_mass: float = 0.5, ground_truth: str | None = "A", length: int = 3,
                 vocab: int = 4) -> tuple[TabularPolicy, AnswerSpace]:
    """Random problem whose leading answer ``A`` holds ``leader_mass``.

    The remaining mass is split by a Dirichlet draw, capped so no other
    answer reaches the leader.
    """
    answers = [chr(ord("A") + i) for i in range(n_answers)]
    rest = 1.0 - leader_mass
    while True:
        others = rng.dirichlet(np.full(n_answers - 1, 4.0)) * rest
        if others.max() < leader_mass:
            break
    masses = {"A": leader_mass, **{a: float(m) for a, m in zip(answers[1:], others)}}
    policy = make_policy(masses, traj_per_answer, rng=rng, length=length, vocab=vocab)
    return policy, AnswerSpace(tuple(answers), ground_truth)
