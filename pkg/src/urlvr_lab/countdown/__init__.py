"""Countdown arithmetic puzzles: parsing, verification, brute-force solving."""

from .cases import dump_cases, generate_cases, load_cases, rounding_cases
from .expr import BinOp, ExpressionTree, Num, ParseError, eval_expression, parse_expression
from .solver import candidates, solve
from .verify import (CANDIDATES, CountdownProblem, VerifyResult, constant_false_verifier,
                     constant_true_verifier, oracle_verifier, verifier_reward_accuracy, verify,
                     zero_tolerance_verifier)

__all__ = [
    "BinOp", "CANDIDATES", "CountdownProblem", "ExpressionTree", "Num", "ParseError",
    "VerifyResult", "candidates", "constant_false_verifier", "constant_true_verifier",
    "dump_cases", "eval_expression", "generate_cases", "load_cases", "oracle_verifier",
    "parse_expression", "rounding_cases", "solve", "verifier_reward_accuracy", "verify",
    "zero_tolerance_verifier",
]
