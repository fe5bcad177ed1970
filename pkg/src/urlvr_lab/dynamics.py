"""Closed-form KL-regularized sharpening and the majority-mass recurrence.

The one-step optimum of ``E[r] - beta * KL(pi || pi_ref)`` is
``pi_ref * exp(r / beta) / Z``. With a binary majority reward the mass on the
majority answer maps ``p -> alpha p / (1 + (alpha - 1) p)``, ``alpha = e^{1/beta}``.
A partial step of efficiency ``eta`` closes a fraction ``eta`` of that gap;
``error_step`` is the same update written for ``eps = 1 - p``, which keeps
full relative precision once ``p`` is within rounding of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rewards as R
from .space import Answer, TabularPolicy, floored_log

ESTIMATOR_KINDS = ("self-certainty", "token-entropy", "trajectory-entropy", "probability", "empo")


@dataclass(frozen=True)
class DynamicsState:
    k: int
    p_maj: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.p_maj <= 1.0:
            raise ValueError(f"p_maj={self.p_maj} outside [0, 1]")
        if abs(self.p_maj + self.epsilon - 1.0) > 1e-12:
            raise ValueError("p_maj + epsilon must equal 1")

    @classmethod
    def initial(cls, p0: float) -> "DynamicsState":
        return cls(0, p0, 1.0 - p0)


@dataclass(frozen=True)
class DynamicsParams:
    """KL strength ``beta`` and a step-efficiency schedule.

    ``eta`` is a constant or a sequence cycled over iterations. ``eta_min``
    defaults to the smallest scheduled value.
    """

    beta: float
    eta: float | tuple[float, ...] = 1.0
    eta_min: float | None = None
    alpha: float = field(init=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        schedule = (self.eta,) if np.isscalar(self.eta) else tuple(self.eta)
        if not schedule:
            raise ValueError("empty eta schedule")
        schedule = tuple(float(e) for e in schedule)
        object.__setattr__(self, "eta", schedule[0] if len(schedule) == 1 else schedule)
        eta_min = min(schedule) if self.eta_min is None else float(self.eta_min)
        object.__setattr__(self, "eta_min", eta_min)
        if not (0 < eta_min <= min(schedule) and max(schedule) <= 1):
            raise ValueError("need 0 < eta_min <= eta <= 1")
        alpha = math.exp(1.0 / self.beta)
        if not alpha > 1:
            raise ValueError("beta too large: alpha rounds to 1")
        object.__setattr__(self, "alpha", alpha)

    def eta_at(self, k: int) -> float:
        if isinstance(self.eta, tuple):
            return self.eta[k % len(self.eta)]
        return self.eta

    @property
    def rho(self) -> float:
        """Asymptotic contraction at full steps, ``e^{-1/beta}``."""
        return 1.0 / self.alpha

    @property
    def envelope_rate(self) -> float:
        return 1.0 - self.eta_min * (self.alpha - 1.0) / self.alpha


def _check_prob(name: str, p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name}={p} outside [0, 1]")


def p_maj_star(p: float, beta: float) -> float:
    _check_prob("p", p)
    if not beta > 0:
        raise ValueError("beta must be positive")
    alpha = math.exp(1.0 / beta)
    # p plus a non-negative gap, so p <= p* survives rounding
    gap = (alpha - 1.0) * p * (1.0 - p) / (1.0 + (alpha - 1.0) * p)
    return min(p + gap, 1.0)


def error_step(epsilon: float, params: DynamicsParams, k: int = 0) -> float:
    _check_prob("epsilon", epsilon)
    return epsilon * step_multiplier(epsilon, params.alpha, params.eta_at(k))


def effective_step(state: DynamicsState, params: DynamicsParams) -> DynamicsState:
    p = state.p_maj
    target = p_maj_star(p, params.beta)
    eta = params.eta_at(state.k)
    # clamp so that p <= p' <= p* survives rounding
    p_next = min(max(p + eta * (target - p), p), target)
    eps_next = error_step(state.epsilon, params, state.k)
    if abs(p_next + eps_next - 1.0) > 1e-12:
        eps_next = 1.0 - p_next
    return DynamicsState(state.k + 1, p_next, eps_next)


def simulate_recurrence(p0: float, params: DynamicsParams, K: int) -> list[DynamicsState]:
    """States ``k = 1..K`` of the recurrence started at ``p0``.

    ``p0`` in {0, 1} is a fixed point: the trace is constant and a warning
    flag is the caller's job (see ``is_degenerate``).
    """
    _check_prob("p0", p0)
    if K < 1:
        raise ValueError("K must be at least 1")
    state = DynamicsState.initial(p0)
    trace = []
    for _ in range(K):
        eps = error_step(state.epsilon, params, state.k)
        state = DynamicsState(state.k + 1, 1.0 - eps, eps)
        trace.append(state)
    return trace


def is_degenerate(p0: float) -> bool:
    return p0 in (0.0, 1.0)


def error_ratios(p0: float, trace: Sequence[DynamicsState]) -> list[float]:
    """``eps_k / eps_{k-1}`` for each state of the trace (``eps_0 = 1 - p0``)."""
    prev = 1.0 - p0
    out = []
    for s in trace:
        out.append(s.epsilon / prev if prev > 0 else float("nan"))
        prev = s.epsilon
    return out


def geometric_envelope(p0: float, params: DynamicsParams, K: int) -> float:
    """``(1 - eta_min (alpha - 1) / alpha)^K * eps_0``.

    The rate is the small-error limit of the per-step multiplier. The
    multiplier grows with ``eps``, so for ``eps_0 > 0`` this quantity sits
    below the true error rather than above it; ``error_upper_bound`` is the
    valid envelope.
    """
    return params.envelope_rate ** K * (1.0 - p0)


def step_multiplier(epsilon: float, alpha: float, eta: float) -> float:
    return 1.0 - eta * (alpha - 1.0) * (1.0 - epsilon) / (alpha - (alpha - 1.0) * epsilon)


def error_upper_bound(p0: float, params: DynamicsParams, K: int) -> float:
    """``m(eps_0, eta_min)^K * eps_0``, an upper bound on ``eps_K``.

    Errors only shrink and the multiplier increases with ``eps`` and
    decreases with ``eta``, so every step contracts by at most ``m(eps_0, eta_min)``.
    """
    eps0 = 1.0 - p0
    return step_multiplier(eps0, params.alpha, params.eta_min) ** K * eps0


# --- policy-level closed forms ----------------------------------------------


def optimal_policy(ref: TabularPolicy, rewards, beta: float) -> TabularPolicy:
    """``pi* ∝ pi_ref * exp(r / beta)`` over the enumerated space."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    r = np.asarray(rewards, dtype=float)
    if r.shape != (len(ref),):
        raise ValueError("need one reward per trajectory")
    if np.any(np.isnan(r)) or np.any(r == np.inf):
        raise ValueError("rewards must be finite or -inf")
    if not np.any(np.isfinite(r) & np.isfinite(ref.logits)):
        raise ValueError("no trajectory with finite reward and positive reference mass")
    return ref.with_logits(ref.logits + r / beta, name=f"{ref.name}*")


def majority_rewards(policy: TabularPolicy, maj: Answer) -> np.ndarray:
    return policy.answer_mask(maj).astype(float)


def limiting_policy(ref: TabularPolicy, maj: Answer) -> TabularPolicy:
    mask = ref.answer_mask(maj)
    if not mask.any() or ref.probs()[mask].sum() <= 0:
        raise ValueError(f"answer {maj!r} has zero reference mass; limit undefined")
    logits = np.where(mask, ref.logits, -np.inf)
    return ref.with_logits(logits, name=f"{ref.name}-limit")


def trajectory_rewards(policy: TabularPolicy, kind: str) -> np.ndarray:
    """Reward of every enumerated trajectory under ``policy``.

    ``probability`` and ``trajectory-entropy`` read the sequence probability
    from the policy itself (``pi(y)`` and ``log pi(y) / |y|``); the step-wise
    kinds read each trajectory's step distributions; ``empo`` uses the
    answer mass ``pi(ans(y))``.
    """
    probs = policy.probs()
    if kind == "probability":
        return probs.copy()
    if kind == "trajectory-entropy":
        lengths = np.array([len(t) for t in policy.trajectories], dtype=float)
        return floored_log(probs) / lengths
    if kind == "self-certainty":
        return np.array([R.self_certainty(t) for t in policy.trajectories])
    if kind == "token-entropy":
        return np.array([R.token_entropy_reward(t) for t in policy.trajectories])
    if kind == "empo":
        masses = policy.answer_masses()
        return np.array([masses[a] for a in policy.answer_of])
    raise ValueError(f"unknown estimator kind {kind!r}")


def estimator_policy_map(ref: TabularPolicy, current: TabularPolicy, kind: str, beta: float) -> TabularPolicy:
    """One-step optimal policy for estimator ``kind`` evaluated at ``current``."""
    if not ref.same_space(current):
        raise ValueError("reference and current policies live on different spaces")
    return optimal_policy(ref, trajectory_rewards(current, kind), beta)


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
