"""Finite answer/trajectory spaces, tabular softmax policies and rollout sampling."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

PROB_FLOOR = 1e-12
SUM_TOLERANCE = 1e-9
RNG_NAME = "numpy.PCG64"

Answer = Hashable


def floored_log(p):
    """Elementwise ``log(max(p, PROB_FLOOR))``."""
    return np.log(np.maximum(np.asarray(p, dtype=float), PROB_FLOOR))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    m = np.max(z)
    if not np.isfinite(m):
        raise ValueError("softmax needs at least one finite logit")
    w = np.exp(z - m)
    return w / w.sum()


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(-np.sum(p * floored_log(p)))


def kl_divergence(p, q) -> float:
    """KL(p || q) with the probability floor applied to both logs."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    return float(np.sum(p[mask] * (floored_log(p[mask]) - floored_log(q[mask]))))


@dataclass(frozen=True)
class ProbabilityVector:
    probs: tuple[float, ...]
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = tuple(map(float, self.probs))
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise ValueError("empty distribution")
        arr = np.array(probs, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "_array", arr)
        total = math.fsum(probs)
        # NaN fails the comparison; with no negatives, a finite sum rules out inf
        if not (arr.min() >= 0 and math.isfinite(total)):
            raise ValueError(f"entries must be finite and non-negative: {probs}")
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"entries sum to {total!r}, not 1")

    @classmethod
    def normalized(cls, weights: Iterable[float]) -> "ProbabilityVector":
        w = np.asarray(list(weights), dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("cannot normalize a zero vector")
        return cls(tuple(w / total))

    @classmethod
    @lru_cache(maxsize=256)
    def uniform(cls, size: int) -> "ProbabilityVector":
        return cls((1.0 / size,) * size)

    @classmethod
    @lru_cache(maxsize=4096)
    def one_hot(cls, size: int, index: int) -> "ProbabilityVector":
        probs = [0.0] * size
        probs[index] = 1.0
        return cls(tuple(probs))

    @property
    def array(self) -> np.ndarray:
        return self._array

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


@dataclass(frozen=True)
class Trajectory:
    """A token sequence with its per-step distributions and extracted answer."""

    tokens: tuple[int, ...]
    step_dists: tuple[ProbabilityVector, ...]
    answer: Answer

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "step_dists", tuple(self.step_dists))
        if len(self.tokens) == 0:
            raise ValueError("trajectory must contain at least one token")
        if len(self.tokens) != len(self.step_dists):
            raise ValueError("tokens and step_dists differ in length")
        for t, (tok, dist) in enumerate(zip(self.tokens, self.step_dists)):
            if not 0 <= tok < len(dist):
                raise ValueError(f"token {tok} at step {t} outside vocabulary of size {len(dist)}")

    def __len__(self) -> int:
        return len(self.tokens)

    def realized_probs(self) -> np.ndarray:
        return np.array([d.probs[tok] for tok, d in zip(self.tokens, self.step_dists)])


@dataclass(frozen=True)
class AnswerSpace:
    answers: tuple[Answer, ...]
    ground_truth: Answer | None = None

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(self.answers))
        if len(set(self.answers)) != len(self.answers):
            raise ValueError("answers must be pairwise distinct")
        if self.ground_truth is not None and self.ground_truth not in self.answers:
            raise ValueError(f"ground truth {self.ground_truth!r} not in answer set")

    def __contains__(self, answer) -> bool:
        return answer in self.answers


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Softmax distribution over an explicitly enumerated trajectory table.

    Logits may be ``-inf`` to encode exact zero mass (limiting policies).
    """

    logits: np.ndarray
    trajectories: tuple[Trajectory, ...]
    name: str = "policy"
    _probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        logits = np.array(self.logits, dtype=float)
        trajectories = tuple(self.trajectories)
        if logits.ndim != 1 or len(logits) != len(trajectories):
            raise ValueError("need exactly one logit per trajectory")
        if len(trajectories) == 0:
            raise ValueError("empty trajectory table")
        if np.any(np.isnan(logits)) or np.any(logits == np.inf):
            raise ValueError("logits must be finite or -inf")
        logits.setflags(write=False)
        probs = softmax(logits)
        probs.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "trajectories", trajectories)
        object.__setattr__(self, "_probs", probs)

    @classmethod
    def from_probs(cls, probs, trajectories, name: str = "policy") -> "TabularPolicy":
        p = np.asarray(probs, dtype=float)
        with np.errstate(divide="ignore"):
            logits = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        return cls(logits, tuple(trajectories), name)

    def with_logits(self, logits, name: str | None = None) -> "TabularPolicy":
        return TabularPolicy(logits, self.trajectories, self.name if name is None else name)

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def answer_of(self) -> tuple[Answer, ...]:
        return tuple(t.answer for t in self.trajectories)

    @property
    def answers(self) -> tuple[Answer, ...]:
        """Distinct answers in sorted (tie-break) order."""
        return tuple(sorted(set(self.answer_of), key=_answer_key))

    def probs(self, temperature: float = 1.0) -> np.ndarray:
        if temperature == 1.0:
            return self._probs
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        return softmax(self.logits / temperature)

    def answer_masses(self) -> dict[Answer, float]:
        masses = dict.fromkeys(self.answers, 0.0)
        for p, a in zip(self._probs, self.answer_of):
            masses[a] += float(p)
        return masses

    def answer_mask(self, answer: Answer) -> np.ndarray:
        return np.array([a == answer for a in self.answer_of], dtype=bool)

    def same_space(self, other: "TabularPolicy") -> bool:
        return len(self) == len(other) and self.answer_of == other.answer_of


@dataclass(frozen=True)
class RolloutSet:
    rollouts: tuple[Trajectory, ...]
    indices: tuple[int, ...]
    source_policy_id: str
    sampling_temperature: float
    seed: int | None = None
    rng: str = RNG_NAME

    def __post_init__(self):
        object.__setattr__(self, "rollouts", tuple(self.rollouts))
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(self.rollouts) == 0:
            raise ValueError("rollout set must contain at least one rollout")
        if len(self.indices) != len(self.rollouts):
            raise ValueError("indices must align with rollouts")
        if not self.sampling_temperature > 0:
            raise ValueError("sampling temperature must be positive")

    def __len__(self) -> int:
        return len(self.rollouts)

    @property
    def answers(self) -> list[Answer]:
        return [r.answer for r in self.rollouts]


def _answer_key(a):
    # Mixed-type answer sets still need one total order.
    return (type(a).__name__, a) if not isinstance(a, (int, float)) else ("", a)


def sort_answers(answers: Iterable[Answer]) -> list[Answer]:
    return sorted(answers, key=_answer_key)


def apply_temperature(dist: ProbabilityVector, T: float) -> ProbabilityVector:
    """Return ``softmax(log(dist) / T)``; ``T == 1`` is the identity."""
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    p = dist.array
    if not np.any(p > 0):
        raise ValueError("degenerate distribution: zero vector")
    if T == 1.0:
        return dist
    z = floored_log(p) / T
    w = np.exp(z - z.max())
    return ProbabilityVector(tuple(w / w.sum()))


def sample_rollouts(policy: TabularPolicy, N: int, T: float = 1.0, seed=None) -> RolloutSet:
    """Draw ``N`` i.i.d. trajectories from the temperature-``T`` policy.

    ``seed`` may be an integer or an existing ``np.random.Generator`` (whose
    state is then advanced).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if len(policy) == 0:
        raise ValueError("empty trajectory table")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = policy.probs(T)
    idx = rng.choice(len(policy), size=N, p=probs)
    return RolloutSet(
        rollouts=tuple(policy.trajectories[i] for i in idx),
        indices=tuple(int(i) for i in idx),
        source_policy_id=policy.name,
        sampling_temperature=T,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
    )


def answer_mass(policy: TabularPolicy, answer: Answer) -> float:
    mask = policy.answer_mask(answer)
    if not mask.any():
        raise KeyError(f"unknown answer {answer!r}")
    return float(policy.probs()[mask].sum())


def greedy_answer(policy: TabularPolicy) -> Answer:
    """Answer with maximal mass; ties go to the smallest identifier."""
    masses = policy.answer_masses()
    best = max(masses.values())
    # policy.answers is sorted; 1e-12 absorbs summation-order noise in ties
    return next(a for a in policy.answers if masses[a] >= best - 1e-12)


# --- serialization ---------------------------------------------------------


def dumps_space(policy: TabularPolicy) -> str:
    """Serialize a policy and its trajectory table to the line-oriented format.

    Layout::

        space <n_traj> <n_answers>
        <idx> <answer> <logit> <token_count> <tok_1> ... <tok_L>    (one per trajectory)
        <p_1> <p_2> ... <p_V>                                       (one per step, in order)

    Floats are written with ``repr`` so that loading is bit-exact.
    """
    lines = [f"space {len(policy)} {len(policy.answers)}"]
    for i, traj in enumerate(policy.trajectories):
        answer = str(traj.answer)
        if not answer or any(c.isspace() for c in answer):
            raise ValueError(f"answer {answer!r} cannot be serialized")
        toks = " ".join(str(t) for t in traj.tokens)
        lines.append(f"{i} {answer} {float(policy.logits[i])!r} {len(traj)} {toks}")
    for traj in policy.trajectories:
        for dist in traj.step_dists:
            lines.append(" ".join(repr(p) for p in dist.probs))
    return "\n".join(lines) + "\n"


def loads_space(text: str, name: str = "policy") -> TabularPolicy:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][0] != "space" or len(rows[0]) != 3:
        raise ValueError("missing 'space <n_traj> <n_answers>' header")
    n_traj, n_answers = int(rows[0][1]), int(rows[0][2])
    heads = rows[1 : 1 + n_traj]
    if len(heads) != n_traj:
        raise ValueError("truncated trajectory table")
    cursor = 1 + n_traj
    logits, trajectories = [], []
    for expected, head in enumerate(heads):
        idx, answer, logit, count = int(head[0]), head[1], float(head[2]), int(head[3])
        if idx != expected:
            raise ValueError(f"trajectory index {idx} out of order")
        tokens = [int(t) for t in head[4:]]
        if len(tokens) != count:
            raise ValueError(f"trajectory {idx}: expected {count} tokens")
        dists = []
        for _ in range(count):
            if cursor >= len(rows):
                raise ValueError("truncated step distributions")
            dists.append(ProbabilityVector(tuple(float(v) for v in rows[cursor])))
            cursor += 1
        logits.append(logit)
        trajectories.append(Trajectory(tuple(tokens), tuple(dists), answer))
    if cursor != len(rows):
        raise ValueError("trailing data after step distributions")
    policy = TabularPolicy(np.array(logits), tuple(trajectories), name)
    if len(policy.answers) != n_answers:
        raise ValueError(f"header declares {n_answers} answers, table has {len(policy.answers)}")
    return policy


# --- constructors used by tests, trainer and CLI ---------------------------


def random_trajectory(rng: np.random.Generator, length: int, vocab: int, answer: Answer = "A",
                      concentration: float = 1.0) -> Trajectory:
    p = rng.dirichlet(np.full(vocab, concentration), size=length)
    p /= p.sum(axis=1, keepdims=True)
    # inverse-CDF draw per step; the clip guards against a final cumsum below 1
    u = rng.random(length)
    tokens = np.minimum((np.cumsum(p, axis=1) <= u[:, None]).sum(axis=1), vocab - 1)
    dists = tuple(ProbabilityVector(tuple(row)) for row in p)
    return Trajectory(tuple(tokens.tolist()), dists, answer)


def make_policy(answer_masses: dict, traj_per_answer: int = 1, *, rng=None, length: int = 3,
                vocab: int = 4, name: str = "policy") -> TabularPolicy:
    """Policy whose answer masses are exactly ``answer_masses``.

    Mass is split evenly (or Dirichlet-randomly when ``rng`` is given) among
    ``traj_per_answer`` trajectories per answer.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    probs, trajectories = [], []
    for answer, mass in answer_masses.items():
        split = (np.full(traj_per_answer, 1.0 / traj_per_answer) if traj_per_answer == 1
                 else rng.dirichlet(np.full(traj_per_answer, 4.0)))
        for share in split:
            probs.append(mass * share)
            trajectories.append(random_trajectory(rng, length, vocab, answer))
    return TabularPolicy.from_probs(np.array(probs) / np.sum(probs), trajectories, name)
