"""Trace CSV, summary and SVG plot writers."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

CSV_COLUMNS = ("step", "p_maj", "epsilon", "mv_reward", "gt_reward", "reward_acc",
               "label_acc", "actor_entropy", "kl_drift", "eta_hat")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return "%.12g" % float(value)


def format_rows(rows: Iterable[Mapping], columns: Sequence[str] = CSV_COLUMNS) -> str:
    lines = [",".join(columns)]
    for row in rows:
        unknown = set(row) - set(columns)
        if unknown:
            raise KeyError(f"unknown trace columns: {sorted(unknown)}")
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def emit_csv(rows: Sequence[Mapping], path, columns: Sequence[str] = CSV_COLUMNS) -> Path:
    """Write ``rows`` (dicts keyed by column name) with ``%.12g`` floats and LF endings."""
    rows = list(rows)
    if not rows:
        raise ValueError("empty trace")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_rows(rows, columns))
    return path


def write_summary(summary: Mapping, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in summary.items():
            fh.write(f"{key}={_fmt(value) if isinstance(value, float) else value}\n")
    return path


def write_plot(rows: Sequence[Mapping], columns: Sequence[str], path, title: str = "") -> Path:
    """Static SVG line chart, one series per column (byte-stable output)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "urlvr-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        steps = [r["step"] for r in rows]
        for col in columns:
            if col not in CSV_COLUMNS:
                raise KeyError(f"cannot plot unknown column {col!r}")
            pts = [(s, r.get(col)) for s, r in zip(steps, rows) if r.get(col) is not None]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], label=col)
        ax.set_xlabel("step")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
