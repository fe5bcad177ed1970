"""Exhaustive Countdown solver over permutations, tree shapes and operators."""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations, product

from .expr import ALLOWED_OPS, BinOp, Node, Num, eval_node, to_text
from .verify import DEFAULT_TOL, CountdownProblem


def _shapes(leaves: tuple) -> list[Node]:
    """Every binary tree with ``leaves`` in order and ``None`` placeholders for operators."""
    if len(leaves) == 1:
        return [Num(leaves[0])]
    out = []
    for split in range(1, len(leaves)):
        for left in _shapes(leaves[:split]):
            for right in _shapes(leaves[split:]):
                out.append(BinOp("", left, right))
    return out


def _fill(node: Node, ops) -> Node:
    if isinstance(node, Num):
        return node
    left = _fill(node.left, ops)
    right = _fill(node.right, ops)
    return BinOp(next(ops), left, right)


def _n_ops(node: Node) -> int:
    return 0 if isinstance(node, Num) else 1 + _n_ops(node.left) + _n_ops(node.right)


@lru_cache(maxsize=4096)
def candidates(nums: tuple[int, ...]) -> tuple[tuple[float, str], ...]:
    """All ``(value, text)`` pairs in a fixed enumeration order.

    Order: distinct operand permutations (lexicographic), then tree shapes,
    then operator assignments. Expressions dividing by zero are skipped.
    """
    out = []
    for perm in sorted(set(permutations(nums))):
        for shape in _shapes(perm):
            for ops in product(ALLOWED_OPS, repeat=_n_ops(shape)):
                tree = _fill(shape, iter(ops))
                try:
                    value = eval_node(tree)
                except ZeroDivisionError:
                    continue
                out.append((value, to_text(tree)))
    return tuple(out)


def solve(problem: CountdownProblem, tol: float = DEFAULT_TOL) -> str | None:
    """First verifying expression in enumeration order, or ``None``."""
    if not isinstance(problem, CountdownProblem):
        problem = CountdownProblem(*problem)
    for value, text in candidates(tuple(sorted(problem.nums))):
        if abs(value - problem.target) <= tol:
            return text
    return None
