"""JSON-lines case files ``{nums, target, expr, expected}`` and a labeled-case generator."""

from __future__ import annotations

import json
from itertools import combinations_with_replacement
from typing import Iterable

import numpy as np

from .solver import candidates, solve
from .verify import CountdownProblem, verify


def load_cases(path) -> list[tuple[str, CountdownProblem, bool]]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                problem = CountdownProblem(tuple(rec["nums"]), rec["target"])
                cases.append((rec["expr"], problem, bool(rec["expected"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad case record ({exc})") from exc
    return cases


def dump_cases(cases: Iterable[tuple[str, CountdownProblem, bool]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for expr, problem, expected in cases:
            rec = {"nums": list(problem.nums), "target": problem.target, "expr": expr,
                   "expected": bool(expected)}
            fh.write(json.dumps(rec) + "\n")


def rounding_cases(limit: int = 20, pool=range(1, 10)) -> list[tuple[str, CountdownProblem]]:
    """Problems whose float value misses an integer target by rounding only.

    One expression per number multiset (3-number sets first), up to ``limit``.
    """
    out = []
    for size in (3, 4):
        for key in combinations_with_replacement(pool, size):
            for value, text in candidates(key):
                r = round(value)
                if value != r and abs(value - r) <= 1e-9 and 1 <= r <= 100:
                    out.append((text, CountdownProblem(key, r)))
                    break
            if len(out) >= limit:
                return out
    return out


def _corrupt(rng: np.random.Generator, text: str, problem: CountdownProblem) -> str:
    kind = int(rng.integers(6))
    nums = problem.nums
    if kind == 0:  # leaves numbers unused
        return f"{nums[0]}+{nums[1]}"
    if kind == 1:  # reuses a number
        return f"({text})*{nums[0]}/{nums[0]}"
    if kind == 2:  # foreign literal
        return f"({text})+10"
    if kind == 3:  # words
        return "x+" + text
    if kind == 4:  # equation
        return f"{text}={problem.target}"
    return f"({text})^1"  # disallowed operator, foreign literal


def generate_cases(n: int, seed: int = 0, n_rounding: int = 0) -> list[tuple[str, CountdownProblem, bool]]:
    """Labeled cases: solver outputs, corrupted variants and float-rounding cases.

    Labels come from ``verify`` at the default tolerance.
    """
    rng = np.random.default_rng(seed)
    cases = []
    for text, problem in rounding_cases(limit=n_rounding) if n_rounding else []:
        cases.append((text, problem, verify(text, problem).valid))
    while len(cases) < n:
        size = int(rng.integers(3, 5))
        nums = tuple(int(v) for v in rng.integers(1, 10, size=size))
        target = int(rng.integers(1, 101))
        problem = CountdownProblem(nums, target)
        text = solve(problem)
        if text is None:
            text = "+".join(str(v) for v in nums)
        elif rng.random() < 0.5:
            text = _corrupt(rng, text, problem)
        cases.append((text, problem, verify(text, problem).valid))
    return cases
