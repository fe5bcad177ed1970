"""``urlvr-lab run|validate|version``.

Exit codes: 0 success, 2 config or input error, 3 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .countdown import CANDIDATES, load_cases, verifier_reward_accuracy
from .dynamics import (DynamicsParams, error_ratios, geometric_envelope, is_degenerate,
                       simulate_recurrence)
from .metrics import model_collapse_step
from .reporting import CSV_COLUMNS, emit_csv, write_plot, write_summary
from .space import RNG_NAME, AnswerSpace, loads_space
from .trainer import TrainConfig, make_problem, train

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUT_ENV = "URLVR_LAB_OUT"


@dataclass
class Prepared:
    config: ExperimentConfig
    output: Path
    run: Callable[[], tuple[list[dict], dict, dict[str, tuple[list[dict], tuple]]]]


def output_dir(config: ExperimentConfig) -> Path:
    override = os.environ.get(OUT_ENV)
    return Path(override) if override else config.resolve(str(config.output))


# --- mode runners: each returns (trace rows, summary, extra csv files) -------


def _dynamics(config: ExperimentConfig):
    p = config.params
    try:
        params = DynamicsParams(beta=p["beta"], eta=p["eta"], eta_min=p["eta_min"])
    except ValueError as exc:
        raise ConfigError(f"dynamics: {exc}") from None
    if not 0.0 <= p["p0"] <= 1.0:
        raise ConfigError("dynamics.p0 must lie in [0, 1]")
    if p["K"] < 1:
        raise ConfigError("dynamics.K must be at least 1")

    def run():
        p0, K = p["p0"], p["K"]
        states = simulate_recurrence(p0, params, K)
        ratios = error_ratios(p0, states)
        a = params.alpha
        rows, rate_rows = [], []
        prev = 1.0 - p0
        for s, ratio in zip(states, ratios):
            # realized step efficiency, computed in error space
            eps_star = prev / (a - (a - 1.0) * prev)
            gap = prev - eps_star
            eta_hat = (prev - s.epsilon) / gap if gap > 0 else None
            rows.append({"step": s.k, "p_maj": s.p_maj, "epsilon": s.epsilon, "eta_hat": eta_hat})
            rate_rows.append({"k": s.k, "p_maj": s.p_maj, "epsilon": s.epsilon,
                              "ratio": None if math.isnan(ratio) else ratio})
            prev = s.epsilon
        eps_K = states[-1].epsilon
        envelope = geometric_envelope(p0, params, K)
        summary = {
            "mode": "dynamics",
            "steps": K,
            "final_p_maj": states[-1].p_maj,
            "final_epsilon": eps_K,
            "final_ratio": rate_rows[-1]["ratio"] if rate_rows[-1]["ratio"] is not None else "nan",
            "rho": params.rho,
            "envelope_bound": envelope,
            "envelope_holds": str(eps_K <= envelope).lower(),
            "degenerate_start": str(is_degenerate(p0)).lower(),
        }
        return rows, summary, {"rates.csv": (rate_rows, ("k", "p_maj", "epsilon", "ratio"))}

    return run


def _train(config: ExperimentConfig):
    p = config.params
    try:
        tc = TrainConfig(reward_kind=p["reward"], n_rollouts=p["n_rollouts"],
                         global_batch=p["global_batch"], mini_batch=p["mini_batch"],
                         learning_rate=p["lr"], kl_coef=p["kl_coef"], temperature=p["temperature"],
                         steps=p["steps"], seed=config.seed, baseline=p["baseline"])
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from None
    if p["problems"] < 1:
        raise ConfigError("train.problems must be positive")
    space_text = None
    if p["space_file"] is not None:
        path = config.resolve(p["space_file"])
        try:
            space_text = path.read_text(encoding="utf-8")
            loads_space(space_text)
        except OSError as exc:
            raise ConfigError(f"cannot read space file {path}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"bad space file {path}: {exc}") from None
    elif not 0.0 < p["leader_mass"] < 1.0:
        raise ConfigError("train.leader_mass must lie in (0, 1)")

    def run():
        if space_text is not None:
            policy = loads_space(space_text)
            space = AnswerSpace(tuple(policy.answers), p["ground_truth"])
            problems = [(policy, space)] * p["problems"]
        else:
            # problem draws use their own stream so training randomness is unaffected
            rng = np.random.default_rng([config.seed, 1])
            gt = p["ground_truth"] or "A"
            problems = [make_problem(rng, p["n_answers"], p["traj_per_answer"], p["leader_mass"], gt)
                        for _ in range(p["problems"])]
        trace = train(tc, problems)
        rows = []
        for r in trace.records:
            pm = float(np.mean(r.p_maj))
            rows.append({"step": r.step, "p_maj": pm, "epsilon": 1.0 - pm,
                         "mv_reward": r.mean_reward, "gt_reward": r.gt_reward,
                         "reward_acc": r.reward_accuracy, "label_acc": r.label_accuracy,
                         "actor_entropy": r.actor_entropy, "kl_drift": r.kl_drift,
                         "eta_hat": r.eta_hat})
        accs = [r.reward_accuracy for r in trace.records if r.reward_accuracy is not None]
        collapse = model_collapse_step(accs) if accs else None
        last = trace.records[-1]
        summary = {
            "mode": "train",
            "reward": tc.reward_kind,
            "steps": tc.steps,
            "final_p_maj": float(np.mean(last.p_maj)),
            "final_kl_drift": last.kl_drift,
            "final_label_acc": last.label_accuracy if last.label_accuracy is not None else "",
            "majority_flips": trace.total_flips,
            "collapse_step": collapse if collapse is not None else "none",
        }
        return rows, summary, {}

    return run


def _read_trace(path: Path, column: str) -> list[float]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"empty trace file {path}")
    try:
        return [float(v) for v in lines]
    except ValueError:
        pass
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or column not in reader.fieldnames:
        raise ConfigError(f"trace file {path} has no {column!r} column")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            out.append(float(row[column]))
        except (TypeError, ValueError):
            raise ConfigError(f"{path}:{i}: bad {column} value {row[column]!r}") from None
    return out


def _collapse(config: ExperimentConfig):
    p = config.params
    path = config.resolve(p["trace"])
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    values = _read_trace(path, p["column"])

    def run():
        step = model_collapse_step(values, p["threshold"])
        rows = [{"step": i, "reward_acc": v} for i, v in enumerate(values, start=1)]
        summary = {"mode": "collapse", "threshold": p["threshold"], "n_steps": len(values),
                   "collapse_step": step if step is not None else "none"}
        return rows, summary, {}

    return run


def _countdown(config: ExperimentConfig):
    p = config.params
    path = config.resolve(p["cases"])
    if not path.is_file():
        raise ConfigError(f"case file not found: {path}")
    if p["candidate"] not in CANDIDATES:
        raise ConfigError(f"unknown candidate {p['candidate']!r}; expected one of {', '.join(CANDIDATES)}")
    try:
        cases = load_cases(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not cases:
        raise ConfigError(f"no cases in {path}")
    candidate = CANDIDATES[p["candidate"]]

    def run():
        rows, hits = [], 0
        for i, (expr, problem, label) in enumerate(cases, start=1):
            hits += bool(candidate(expr, problem)) == label
            rows.append({"step": i, "reward_acc": hits / i})
        summary = {"mode": "countdown", "candidate": p["candidate"], "n_cases": len(cases),
                   "n_valid": sum(label for _, _, label in cases),
                   "accuracy": verifier_reward_accuracy(candidate, cases)}
        return rows, summary, {}

    return run


RUNNERS = {"dynamics": _dynamics, "train": _train, "collapse": _collapse, "countdown": _countdown}


def prepare(config_path) -> Prepared:
    """Parse and validate a config, raising ``ConfigError`` on any problem."""
    config = load_config(config_path)
    unknown = [c for c in config.plot if c not in CSV_COLUMNS]
    if unknown:
        raise ConfigError(f"cannot plot unknown columns: {', '.join(unknown)}")
    run = RUNNERS[config.mode](config)
    return Prepared(config, output_dir(config), run)


def execute(prepared: Prepared) -> Path:
    out = prepared.output
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} not writable: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} not writable")
    rows, summary, extra = prepared.run()
    for row in rows:
        for key, value in row.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise RuntimeError(f"non-finite {key} at step {row.get('step')}")
    emit_csv(rows, out / "trace.csv")
    for name, (extra_rows, columns) in extra.items():
        emit_csv(extra_rows, out / name, columns)
    summary = {**summary, "seed": prepared.config.seed, "rng": RNG_NAME, "version": __version__}
    write_summary(summary, out / "summary.txt")
    if prepared.config.plot:
        write_plot(rows, prepared.config.plot, out / "plot.svg", title=prepared.config.mode)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urlvr-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", type=Path)
    val_p = sub.add_parser("validate", help="parse and check a config without running it")
    val_p.add_argument("config", type=Path)
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        prepared = prepare(args.config)
        if args.command == "validate":
            print(f"ok: mode={prepared.config.mode} output={prepared.output}")
            return EXIT_OK
        out = execute(prepared)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, FloatingPointError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
