"""Experiment harness: build a problem, run solvers, write traces and a summary.

Every requested solver runs from the same start on a fresh objective
over problem data generated once per (spec, seed), so each run owns its
work counters and identical specs reproduce identical traces except for
the wall-clock columns.  Per-solver failures become recorded statuses
rather than aborting the remaining solvers.

Outputs per experiment directory:

* ``<solver>.csv``   one trace per solver (see solvers.TRACE_COLUMNS)
* ``summary.json``   final values, statuses, and a config echo
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .krylov import KrylovConfig
from .problems import (
    load_mnist_idx,
    make_gp_instance,
    make_mlr,
    make_rfm,
    make_synthetic_classification,
)
from .solvers import (
    SolveStatus,
    SolverConfig,
    lsemink,
    newton_cg,
    ngd,
    smnk,
    write_trace_csv,
)

__all__ = [
    "PROBLEMS",
    "SOLVERS",
    "DEFAULT_BUDGETS",
    "ExperimentSpec",
    "SolverResult",
    "RunSummary",
    "run_experiment",
    "compare_report",
]

SOLVERS = {
    "lsemink": lsemink,
    "ncg": newton_cg,
    "smnk": smnk,
    "ngd": ngd,
}

PROBLEMS = ("gp", "mlr_synthetic", "mlr_mnist")

#: Per-sweep work budgets used when the spec leaves the budget unset.
DEFAULT_BUDGETS = {"gp": 10_000, "mlr_synthetic": 3_000, "mlr_mnist": 3_000}

#: Statuses rendered as "--" in comparison tables: the scheme failed to
#: return a solution (budget exhaustion still reports its final values).
_FAILED = {SolveStatus.LINE_SEARCH_FAILURE.value, SolveStatus.NUMERICAL_FAILURE.value, "Error"}


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one experiment."""

    problem: str
    solvers: tuple[str, ...] = ("lsemink", "ncg", "smnk", "ngd")
    out_dir: str = "results"
    seed: int = 0
    # smoothed-max problem parameters
    eta: float = 1e-1
    m: int = 100
    n: int = 20
    # classification problem parameters
    num_data: int = 100
    num_classes: int = 10
    feature_dim: int = 784
    rfm_dim: int = 1000
    alpha: float = 0.0
    mnist_images: str | None = None
    mnist_labels: str | None = None
    # solver settings (max_work_units falls back to DEFAULT_BUDGETS)
    gtol: float = 1e-14
    xtol: float = 1e-10
    max_work_units: int | None = None
    ktol: float = 1e-3
    kmaxiter: int = 20
    gamma: float = 1e-4
    beta0: float = 1.0

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}, expected one of {PROBLEMS}")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ConfigError(f"unknown solvers {unknown}, expected from {sorted(SOLVERS)}")
        if self.problem == "mlr_mnist" and (not self.mnist_images or not self.mnist_labels):
            raise ConfigError("mlr_mnist needs --mnist-images and --mnist-labels paths")

    def solver_config(self) -> SolverConfig:
        budget = self.max_work_units
        if budget is None:
            budget = DEFAULT_BUDGETS[self.problem]
        return SolverConfig(
            gtol=self.gtol,
            xtol=self.xtol,
            max_work_units=budget,
            gamma=self.gamma,
            beta0=self.beta0,
            krylov=KrylovConfig(ktol=self.ktol, kmaxiter=self.kmaxiter),
        )

    def label(self) -> str:
        if self.problem == "gp":
            return f"gp(eta={self.eta:g})"
        return self.problem


@dataclass
class SolverResult:
    status: str
    final_f: float | None = None
    final_gnorm: float | None = None
    work_units: int | None = None
    work_sweeps: float | None = None
    wall_seconds: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.status in _FAILED


@dataclass
class RunSummary:
    results: dict[str, SolverResult]
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "results": {name: asdict(res) for name, res in self.results.items()},
            "metadata": self.metadata,
        }


def _git_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
    except OSError:
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _problem_factory(spec: ExperimentSpec):
    """Generate the problem data once; return a fresh-objective factory."""
    if spec.problem == "gp":
        inst = make_gp_instance(spec.m, spec.n, spec.eta, spec.seed)
        return inst.to_objective, {"m": spec.m, "n": spec.n, "eta": spec.eta}
    if spec.problem == "mlr_synthetic":
        data = make_synthetic_classification(
            spec.num_data, spec.feature_dim, spec.num_classes, spec.rfm_dim, spec.seed
        )
    else:
        raw = load_mnist_idx(spec.mnist_images, spec.mnist_labels, spec.num_data)
        ext = make_rfm(spec.rfm_dim, raw.feature_dim, spec.seed)
        data = ext.transform_dataset(raw)
    info = {
        "num_data": data.num_samples,
        "num_classes": data.num_classes,
        "rfm_dim": data.feature_dim,
        "alpha": spec.alpha,
    }
    return (lambda: make_mlr(data, tikhonov_alpha=spec.alpha)), info


def run_experiment(spec: ExperimentSpec) -> RunSummary:
    """Run every requested solver and write traces plus ``summary.json``."""
    spec.validate()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    factory, problem_info = _problem_factory(spec)
    cfg = spec.solver_config()

    results: dict[str, SolverResult] = {}
    num_terms = None
    for name in spec.solvers:
        obj = factory()
        num_terms = obj.num_terms
        x0 = np.zeros(obj.n)
        try:
            trace = SOLVERS[name](obj, x0, cfg)
        except Exception as exc:  # failures are data, not aborts
            results[name] = SolverResult(status="Error", error=f"{type(exc).__name__}: {exc}")
            continue
        write_trace_csv(trace, out_dir / f"{name}.csv")
        if not trace.records:
            results[name] = SolverResult(
                status=trace.status.value, error="failed before the first record"
            )
            continue
        last = trace.final_record
        results[name] = SolverResult(
            status=trace.status.value,
            final_f=last.f,
            final_gnorm=last.grad_norm,
            work_units=last.work_units,
            work_sweeps=last.work_units / obj.num_terms,
            wall_seconds=last.wall_seconds,
        )

    summary = RunSummary(
        results=results,
        metadata={
            "label": spec.label(),
            "problem": spec.problem,
            "problem_info": problem_info,
            "num_terms": num_terms,
            "seed": spec.seed,
            "git_revision": _git_revision(),
            "solver_config": {
                "gtol": cfg.gtol,
                "xtol": cfg.xtol,
                "max_work_units": cfg.max_work_units,
                "gamma": cfg.gamma,
                "beta0": cfg.beta0,
                "max_linesearch": cfg.max_linesearch,
                "ktol": cfg.krylov.ktol,
                "kmaxiter": cfg.krylov.kmaxiter,
            },
        },
    )
    (out_dir / "summary.json").write_text(json.dumps(summary.to_json_dict(), indent=2))
    return summary


def _cell(res: SolverResult, row: str) -> str:
    if res.failed:
        return "--"
    if row == "f":
        return f"{res.final_f:.2e}"
    if row == "gnorm":
        return f"{res.final_gnorm:.2e}"
    return f"{res.wall_seconds:.2f}s"


def compare_report(summaries: list[RunSummary]) -> str:
    """Markdown comparison table: rows f, gradient norm, time; one column
    per solver (per summary); failed schemes render as ``--``."""
    if not summaries:
        raise ValueError("need at least one summary to compare")
    multi = len(summaries) > 1
    columns: list[tuple[str, SolverResult]] = []
    for i, summary in enumerate(summaries):
        tag = summary.metadata.get("label", f"run{i}")
        for name, res in summary.results.items():
            header = f"{tag}:{name}" if multi else name
            columns.append((header, res))
    lines = [
        "| | " + " | ".join(h for h, _ in columns) + " |",
        "|---" * (len(columns) + 1) + "|",
    ]
    for row, title in (("f", "f"), ("gnorm", "norm(grad f)"), ("time", "time")):
        cells = " | ".join(_cell(res, row) for _, res in columns)
        lines.append(f"| {title} | {cells} |")
    return "\n".join(lines) + "\n"
