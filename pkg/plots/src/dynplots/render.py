"""Load trace CSVs and render the per-problem figure families.

Figures follow the fixed legend: the online curve is red, the fractional
optimum and the offline comparator are green, the guaranteed bound is
blue.  Rendering never writes to its inputs.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# keep text as text in svg output so figures stay greppable
plt.rcParams["svg.fonttype"] = "none"

REQUIRED_COLUMNS = [
    "t",
    "event",
    "opt_t",
    "integral_objective",
    "bound",
    "frac_movement_step",
    "frac_movement_cum",
    "integral_recourse_step",
    "integral_recourse_cum",
    "num_centers",
]
COMPARATOR_COLUMN = "comparator_movement_cum"
FORMATS = ("png", "svg")

RED, GREEN, BLUE = "#d62728", "#2ca02c", "#1f77b4"


class SchemaError(ValueError):
    """A trace file does not carry the expected column set."""


def load_trace(path) -> dict:
    """Parse one trace CSV into column arrays, validating the schema."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty, expected a header row")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(
                f"{path} is missing columns: {', '.join(missing)}")
        rows = [r for r in reader if r]
    cols = {name: i for i, name in enumerate(header)}
    out = {"events": [r[cols["event"]] for r in rows]}
    for name in REQUIRED_COLUMNS:
        if name == "event":
            continue
        out[name] = np.array([float(r[cols[name]]) for r in rows])
    if COMPARATOR_COLUMN in cols:
        out[COMPARATOR_COLUMN] = np.array(
            [float(r[cols[COMPARATOR_COLUMN]]) for r in rows])
    return out


def _sibling_summary(trace_path: Path) -> dict:
    p = trace_path.parent / "summary.json"
    if not p.exists():
        return {}
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def _collect(in_dir: Path) -> dict:
    """Group parsed traces by problem name."""
    groups: dict[str, list] = {}
    for path in sorted(in_dir.rglob("trace.csv")):
        trace = load_trace(path)
        summary = _sibling_summary(path)
        problem = summary.get("problem", "trace")
        k = summary.get("k")
        groups.setdefault(problem, []).append((trace, k))
    return groups


def _new_axes(title: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.set_title(title)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, ax, out: Path):
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _objective_figure(problem, traces, out):
    fig, ax = _new_axes(f"{problem}: objective over time ({len(traces)} "
                        f"run{'s' if len(traces) != 1 else ''})", "objective")
    alpha = 1.0 if len(traces) == 1 else 0.35
    for i, (tr, _) in enumerate(traces):
        lab = (lambda s: s if i == 0 else None)
        ax.plot(tr["t"], tr["integral_objective"], color=RED, alpha=alpha,
                label=lab("online objective"))
        ax.plot(tr["t"], tr["opt_t"], color=GREEN, alpha=alpha,
                label=lab("fractional opt"))
        ax.plot(tr["t"], tr["bound"], color=BLUE, alpha=alpha,
                label=lab("bound"))
    _finish(fig, ax, out)


def _recourse_figure(problem, traces, out):
    fig, ax = _new_axes(f"{problem}: cumulative recourse", "recourse")
    alpha = 1.0 if len(traces) == 1 else 0.35
    for i, (tr, _) in enumerate(traces):
        lab = (lambda s: s if i == 0 else None)
        ax.plot(tr["t"], tr["integral_recourse_cum"], color=RED, alpha=alpha,
                label=lab("cumulative recourse"))
        if COMPARATOR_COLUMN in tr:
            ax.plot(tr["t"], tr[COMPARATOR_COLUMN], color=GREEN, alpha=alpha,
                    label=lab("offline comparator"))
    _finish(fig, ax, out)


def _centers_figure(problem, traces, out):
    fig, ax = _new_axes(f"{problem}: centers in use", "centers")
    alpha = 1.0 if len(traces) == 1 else 0.35
    k_vals = {k for _, k in traces if k is not None}
    for i, (tr, _) in enumerate(traces):
        ax.plot(tr["t"], tr["num_centers"], color=RED, alpha=alpha,
                drawstyle="steps-post",
                label="centers in use" if i == 0 else None)
    for k in sorted(k_vals):
        ax.axhline(k, color="black", linestyle="--", linewidth=1.0,
                   label=f"k = {k}")
    _finish(fig, ax, out)


def render(in_dir, out_dir, fmt: str = "png") -> list[Path]:
    """Render one figure per (problem, metric) found under in_dir.

    Scans recursively for trace.csv files, grouping by the problem named
    in the sibling summary.json (bare traces group under "trace").  The
    center-count figure is skipped for facility location, which has no
    center budget.  Returns the written image paths.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for problem, traces in _collect(in_dir).items():
        jobs = [("objective", _objective_figure),
                ("recourse", _recourse_figure)]
        if problem != "facility":
            jobs.append(("centers", _centers_figure))
        for metric, draw in jobs:
            out = out_dir / f"{problem}_{metric}.{fmt}"
            draw(problem, traces, out)
            written.append(out)
    return sorted(written)
