"""Render convergence figures and a comparison table from an experiment directory.

Reads the trace CSVs and ``summary.json`` written by the harness and
produces, alongside them:

* ``fig_objective.png``      objective value against work units
* ``fig_gradient_norm.png``  gradient norm against work units
* ``report.md``              the solver comparison table

Work units on the axes are per-sweep (raw operator applications divided
by the number of terms), matching the budget convention.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import RunSummary, SolverResult, compare_report
from .solvers import load_trace_csv

__all__ = ["render_report", "load_summary"]

_STYLES = {
    "lsemink": {"color": "tab:red", "marker": "o"},
    "ncg": {"color": "tab:blue", "marker": "s"},
    "smnk": {"color": "tab:green", "marker": "^"},
    "ngd": {"color": "tab:orange", "marker": "d"},
}


def load_summary(out_dir) -> RunSummary:
    raw = json.loads((Path(out_dir) / "summary.json").read_text())
    results = {
        name: SolverResult(**entry) for name, entry in raw["results"].items()
    }
    return RunSummary(results=results, metadata=raw.get("metadata", {}))


def _collect_traces(out_dir: Path, summary: RunSummary):
    num_terms = summary.metadata.get("num_terms") or 1
    traces = {}
    for name in summary.results:
        path = out_dir / f"{name}.csv"
        if not path.exists():
            continue
        records, _ = load_trace_csv(path)
        work = np.array([r.work_units for r in records]) / num_terms
        f = np.array([r.f for r in records])
        gnorm = np.array([r.grad_norm for r in records])
        traces[name] = (work, f, gnorm)
    return traces


def _plot(traces, column: int, ylabel: str, title: str, path: Path, logy: bool):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, series in traces.items():
        work, values = series[0], series[column]
        style = _STYLES.get(name, {})
        ax.plot(work, values, label=name, markersize=3, linewidth=1.2, **style)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("work units")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(out_dir) -> list[Path]:
    """Write the figures and markdown table; returns the created paths."""
    out_dir = Path(out_dir)
    summary = load_summary(out_dir)
    traces = _collect_traces(out_dir, summary)
    if not traces:
        raise FileNotFoundError(f"{out_dir}: no trace CSVs to plot")
    title = summary.metadata.get("label", out_dir.name)

    written = []
    path = out_dir / "fig_objective.png"
    # log scale only when every objective value is positive
    f_positive = all(np.all(series[1] > 0) for series in traces.values())
    _plot(traces, 1, "objective value", title, path, logy=f_positive)
    written.append(path)

    path = out_dir / "fig_gradient_norm.png"
    gnorm_traces = {
        name: (work, f, np.where(g > 0, g, np.nan))
        for name, (work, f, g) in traces.items()
    }
    _plot(gnorm_traces, 2, "gradient norm", title, path, logy=True)
    written.append(path)

    path = out_dir / "report.md"
    path.write_text(f"# {title}\n\n" + compare_report([summary]))
    written.append(path)
    return written
