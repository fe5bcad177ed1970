"""Flat typed ``key = value`` experiment configs.

One ``mode`` key selects the run; its parameters live under a namespace
(``dynamics.beta``, ``train.lr``, ...). Top-level keys are ``mode``,
``seed``, ``output`` and ``plot``. ``#`` starts a comment. Relative paths,
including ``output``, resolve against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

MODES = ("dynamics", "train", "collapse", "countdown")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# key -> (parser, default); a default of ... marks a required key
SCHEMAS = {
    "dynamics": {
        "p0": (float, ...),
        "beta": (float, ...),
        "eta": (_floats, (1.0,)),
        "eta_min": (float, None),
        "K": (int, ...),
    },
    "train": {
        "reward": (str, "majority"),
        "n_rollouts": (int, 8),
        "global_batch": (int, 1),
        "mini_batch": (int, 1),
        "lr": (float, 0.1),
        "kl_coef": (float, 0.0),
        "temperature": (float, 1.0),
        "steps": (int, 50),
        "baseline": (str, "group-mean"),
        "problems": (int, 1),
        "n_answers": (int, 6),
        "traj_per_answer": (int, 3),
        "leader_mass": (float, 0.5),
        "space_file": (str, None),
        "ground_truth": (str, None),
    },
    "collapse": {
        "trace": (str, ...),
        "threshold": (float, 0.01),
        "column": (str, "reward_acc"),
    },
    "countdown": {
        "cases": (str, ...),
        "candidate": (str, "oracle"),
    },
}

TOP_LEVEL = {
    "mode": (str, ...),
    "seed": (int, 0),
    "output": (str, "urlvr_out"),
    "plot": (_names, ()),
}


@dataclass
class ExperimentConfig:
    mode: str
    params: dict
    output: Path
    seed: int = 0
    plot: tuple[str, ...] = ()
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _coerce(parse, raw: str, key: str, lineno: int):
    try:
        return parse(raw)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}: {exc}") from None


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)

    if "mode" not in raw:
        raise ConfigError("missing 'mode' key")
    mode = raw["mode"][0]
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")

    top = {}
    params = {}
    schema = SCHEMAS[mode]
    for key, (value, lineno) in raw.items():
        if "." in key:
            ns, name = key.split(".", 1)
            if ns != mode:
                raise ConfigError(f"line {lineno}: key {key!r} belongs to mode {ns!r}, config runs {mode!r}")
            if name not in schema:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            params[name] = _coerce(schema[name][0], value, key, lineno)
        elif key in TOP_LEVEL:
            top[key] = _coerce(TOP_LEVEL[key][0], value, key, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    for name, (_, default) in schema.items():
        if name not in params:
            if default is ...:
                raise ConfigError(f"missing required key '{mode}.{name}'")
            params[name] = default
    return ExperimentConfig(
        mode=mode,
        params=params,
        output=Path(top.get("output", TOP_LEVEL["output"][1])),
        seed=top.get("seed", 0),
        plot=top.get("plot", ()),
        base_dir=base_dir if base_dir is not None else Path.cwd(),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
