"""Deterministic Countdown verifier and verifier-agreement harness."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .expr import ALLOWED_OPS, ParseError, eval_expression, parse_expression

CHECKS = ("parse", "membership", "multiplicity", "operators", "value")
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class CountdownProblem:
    nums: tuple[int, ...]
    target: int

    def __post_init__(self):
        nums = tuple(int(n) for n in self.nums)
        object.__setattr__(self, "nums", nums)
        if not 3 <= len(nums) <= 4:
            raise ValueError(f"countdown problems use 3-4 numbers, got {len(nums)}")
        if any(n < 1 for n in nums):
            raise ValueError("numbers must be positive")
        object.__setattr__(self, "target", int(self.target))


@dataclass(frozen=True)
class VerifyResult:
    valid: bool
    failed_check: str | None = None
    computed_value: float | None = None

    def __post_init__(self):
        if self.valid != (self.failed_check is None):
            raise ValueError("valid results carry no failed check and vice versa")
        if self.failed_check is not None and self.failed_check not in CHECKS:
            raise ValueError(f"unknown check {self.failed_check!r}")

    def __bool__(self) -> bool:
        return self.valid


def verify(expr_text, problem: CountdownProblem, tol: float = DEFAULT_TOL) -> VerifyResult:
    """Run the five checks in order, stopping at the first failure.

    1. parses as an arithmetic expression
    2. every literal is one of ``problem.nums``
    3. each number is used exactly as often as it appears in ``nums``
    4. only ``+ - * /`` and parentheses
    5. evaluates to ``target`` within ``tol``
    """
    try:
        tree = parse_expression(expr_text, extended=True)
    except ParseError:
        return VerifyResult(False, "parse")
    leaves = tree.leaves()
    allowed = set(problem.nums)
    if any(isinstance(v, float) or v not in allowed for v in leaves):
        return VerifyResult(False, "membership")
    if Counter(leaves) != Counter(problem.nums):
        return VerifyResult(False, "multiplicity")
    if any(op not in ALLOWED_OPS for op in tree.operators()):
        return VerifyResult(False, "operators")
    try:
        value = eval_expression(tree)
    except (ZeroDivisionError, OverflowError):
        return VerifyResult(False, "value")
    if not abs(value - problem.target) <= tol:
        return VerifyResult(False, "value", value)
    return VerifyResult(True, None, value)


Verifier = Callable[[str, CountdownProblem], bool]


def oracle_verifier(expr_text: str, problem: CountdownProblem) -> bool:
    return verify(expr_text, problem).valid


def verifier_reward_accuracy(candidate: Verifier,
                             cases: Sequence[tuple[str, CountdownProblem, bool]]) -> float:
    """Fraction of cases where ``candidate`` agrees with the oracle label."""
    if not cases:
        raise ValueError("no cases")
    hits = sum(bool(candidate(expr, problem)) == bool(label) for expr, problem, label in cases)
    return hits / len(cases)


def constant_true_verifier(expr_text: str, problem: CountdownProblem) -> bool:
    return True


def constant_false_verifier(expr_text: str, problem: CountdownProblem) -> bool:
    return False


def zero_tolerance_verifier(expr_text: str, problem: CountdownProblem) -> bool:
    """Oracle checks with exact float equality on the value."""
    return verify(expr_text, problem, tol=0.0).valid


CANDIDATES: dict[str, Verifier] = {
    "oracle": oracle_verifier,
    "constant-true": constant_true_verifier,
    "constant-false": constant_false_verifier,
    "zero-tolerance": zero_tolerance_verifier,
}
