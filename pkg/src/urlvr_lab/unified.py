"""Unified cross-entropy reward framework.

Every intrinsic reward is written as

    r = psi( sigma / |I| * sum_{i in I} H(q_i, pi_i) )

with a granularity ``I`` (token positions or the single answer distribution),
an anchor ``q``, a sign ``sigma`` and a monotone transform ``psi``.
``instantiate`` returns the tuple for each known estimator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .space import ProbabilityVector, RolloutSet, Trajectory, floored_log, sort_answers

GRANULARITIES = ("token", "answer")
ANCHORS = ("uniform", "one-hot-realized", "model", "one-hot-answer", "tempered-answer")
TRANSFORMS = ("identity", "affine", "exp")


@dataclass(frozen=True)
class RewardConfig:
    """``(granularity, anchor, sign, transform)`` plus transform parameters.

    ``affine`` adds ``shift + log_vocab_coef * log|V|`` (``log|V|`` averaged
    over steps); ``exp`` computes ``exp(scale * z)`` where ``scale`` is
    ``"length"`` (``|I|``) or ``"one"``. ``tau`` is the temperature of the
    tempered answer distribution.
    """

    granularity: str
    anchor: str
    sign: int
    transform: str = "identity"
    shift: float = 0.0
    log_vocab_coef: float = 0.0
    scale: str = "one"
    tau: float | None = None

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.scale not in ("one", "length"):
            raise ValueError(f"unknown exp scale {self.scale!r}")
        token_anchor = self.anchor in ("uniform", "one-hot-realized", "model")
        if token_anchor != (self.granularity == "token"):
            raise ValueError(f"anchor {self.anchor!r} incompatible with {self.granularity}-level granularity")
        if self.anchor == "tempered-answer":
            if self.tau is None or not self.tau > 0:
                raise ValueError("tempered-answer anchor needs a positive tau")
        if self.granularity == "answer" and self.transform == "exp" and self.scale != "one":
            raise ValueError("answer-level exp transforms use scale 1")


@dataclass(frozen=True)
class AnchoredPair:
    anchor_dist: ProbabilityVector
    model_dist: ProbabilityVector

    def __post_init__(self):
        if len(self.anchor_dist) != len(self.model_dist):
            raise ValueError("anchor and model distributions have different support sizes")


def cross_entropy(pair: AnchoredPair) -> float:
    """``H(q, pi) = -sum_v q(v) log pi(v)`` with the probability floor."""
    q = pair.anchor_dist.array
    pi = pair.model_dist.array
    mask = q > 0
    return -float(q[mask] @ floored_log(pi[mask]))


def tempered_answer_dist(answer_dist: ProbabilityVector, tau: float) -> ProbabilityVector:
    """Softmax of ``mass / tau``; the exponent is the probability, not its log."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    z = answer_dist.array / tau
    w = np.exp(z - z.max())
    return ProbabilityVector(tuple(w / w.sum()))


def empirical_answer_dist(rollouts: RolloutSet) -> tuple[list, ProbabilityVector]:
    counts = Counter(rollouts.answers)
    answers = sort_answers(counts)
    G = len(rollouts)
    return answers, ProbabilityVector(tuple(counts[a] / G for a in answers))


def _token_pairs(config: RewardConfig, traj: Trajectory):
    for tok, dist in zip(traj.tokens, traj.step_dists):
        V = len(dist)
        if config.anchor == "uniform":
            q = ProbabilityVector.uniform(V)
        elif config.anchor == "one-hot-realized":
            q = ProbabilityVector.one_hot(V, tok)
        else:
            q = dist
        yield AnchoredPair(q, dist)


def _apply_transform(config: RewardConfig, z: float, n_terms: int, mean_log_vocab: float) -> float:
    if config.transform == "identity":
        return z
    if config.transform == "affine":
        return z + config.shift + config.log_vocab_coef * mean_log_vocab
    scale = n_terms if config.scale == "length" else 1
    return float(np.exp(scale * z))


def unified_reward(config: RewardConfig, traj: Trajectory | None = None, *,
                   rollouts: RolloutSet | None = None, answers=None,
                   answer_dist: ProbabilityVector | None = None, answer=None) -> float:
    """Evaluate the unified reward for one response.

    Token-level configs read ``traj``. Answer-level configs need the answer
    distribution, given either as ``(answers, answer_dist)`` or as
    ``rollouts`` (empirical frequencies); the scored answer is ``answer`` or
    ``traj.answer``.
    """
    if config.granularity == "token":
        if traj is None:
            raise ValueError("token-level reward needs a trajectory")
        pairs = list(_token_pairs(config, traj))
        total = sum(cross_entropy(p) for p in pairs)
        z = config.sign * total / len(pairs)
        mean_log_vocab = math.fsum(math.log(len(p.model_dist)) for p in pairs) / len(pairs)
        return _apply_transform(config, z, len(pairs), mean_log_vocab)

    if answer_dist is None:
        if rollouts is None:
            raise ValueError("answer-level reward needs an answer distribution or rollouts")
        answers, answer_dist = empirical_answer_dist(rollouts)
    elif answers is None:
        raise ValueError("answer_dist given without its answer labels")
    if len(answers) != len(answer_dist):
        raise ValueError("answer labels and distribution differ in length")
    scored = answer if answer is not None else (traj.answer if traj is not None else None)
    if scored is None:
        raise ValueError("answer-level reward needs the scored answer")
    model = answer_dist
    if config.anchor == "tempered-answer":
        model = tempered_answer_dist(answer_dist, config.tau)
    answers = list(answers)
    if scored in answers:
        anchor = ProbabilityVector.one_hot(len(answers), answers.index(scored))
        h = cross_entropy(AnchoredPair(anchor, model))
    else:
        # an answer outside the support has zero mass; floor it
        h = -float(floored_log(0.0))
    z = config.sign * h
    return _apply_transform(config, z, 1, 0.0)


ESTIMATOR_KINDS = ("self-certainty", "token-entropy", "trajectory-entropy", "probability",
                   "empo", "majority-voting")


def instantiate(kind: str, tau: float | None = None) -> RewardConfig:
    """Framework tuple for a named estimator.

    Self-certainty is bound to its KL definition, i.e. ``H(U, pi) - log|V|``.
    ``majority-voting`` needs an explicit finite ``tau``; the hard indicator
    is only its ``tau -> 0`` limit.
    """
    if kind == "self-certainty":
        return RewardConfig("token", "uniform", +1, "affine", log_vocab_coef=-1.0)
    if kind == "token-entropy":
        return RewardConfig("token", "model", -1, "identity")
    if kind == "trajectory-entropy":
        return RewardConfig("token", "one-hot-realized", -1, "identity")
    if kind == "probability":
        return RewardConfig("token", "one-hot-realized", -1, "exp", scale="length")
    if kind == "empo":
        return RewardConfig("answer", "one-hot-answer", -1, "exp")
    if kind == "majority-voting":
        if tau is None:
            raise ValueError("majority-voting instantiation needs tau")
        return RewardConfig("answer", "tempered-answer", -1, "exp", tau=tau)
    raise ValueError(f"unknown estimator kind {kind!r}")


_BLOCK_FIELDS = ("granularity", "anchor", "sign", "transform", "shift", "log_vocab_coef", "scale", "tau")


def to_block(config: RewardConfig, prefix: str = "reward") -> str:
    """Render as namespaced ``key = value`` lines; floats use ``repr`` for exact round-trips."""
    lines = []
    for name in _BLOCK_FIELDS:
        value = getattr(config, name)
        if value is None:
            continue
        lines.append(f"{prefix}.{name} = {value!r}" if isinstance(value, float) else f"{prefix}.{name} = {value}")
    return "\n".join(lines) + "\n"


def from_block(text: str, prefix: str = "reward") -> RewardConfig:
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = (s.strip() for s in line.partition("="))
        if not key.startswith(prefix + "."):
            raise ValueError(f"key {key!r} outside the {prefix!r} block")
        name = key[len(prefix) + 1:]
        if name not in _BLOCK_FIELDS:
            raise ValueError(f"unknown reward key {key!r}")
        values[name] = value
    kwargs = {k: v for k, v in values.items()}
    if "sign" in kwargs:
        kwargs["sign"] = int(kwargs["sign"])
    for name in ("shift", "log_vocab_coef", "tau"):
        if name in kwargs:
            kwargs[name] = float(kwargs[name])
    return RewardConfig(**kwargs)
