"""Line-search solvers for log-sum-exp objectives.

All four methods share one skeleton: evaluate the objective and gradient,
build a candidate update from a Krylov solve, accept it with a
backtracking Armijo test, and append one trace record per accepted step.
They differ in the operator behind the Krylov solve and in what the
backtracking parameter controls:

``lsemink``
    Newton system shifted by ``beta`` times the row-space metric
    ``sum_k w_k J_k' J_k``.  The direction depends nonlinearly on the
    shift, so every rejected trial pays for a fresh CG solve.  After an
    accepted step the shift is halved if the first trial succeeded,
    otherwise kept.
``smnk``
    Newton system shifted by ``beta`` times the identity.  One Lanczos
    factorization per outer iteration is reused across all shift trials,
    so rejected trials only pay for objective evaluations.
``newton_cg``
    Unshifted Newton system; backtracking halves a step length along the
    fixed CG direction.
``ngd``
    Direction from the models-only metric ``sum_k w_k J_k' J_k + alpha I``
    scaled by an adaptive inverse step size, following the same
    doubling/halving schedule as the shifts.

Work is measured in operator applications, read off the objective's
term counters.  Budgets are denominated per sweep over the terms: a
budget of W allows ``W * num_terms`` raw applications, which for
single-model problems coincides with the raw count.  The budget is
checked before every Krylov operator product and every trial
evaluation, so a run never overshoots it by more than one
Hessian-vector product (two applications per term).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NonFiniteError, SingularTridiagonal
from .krylov import (
    KrylovConfig,
    KrylovTermination,
    cg_solve,
    lanczos_factorize,
    lanczos_shifted_solve,
)
from .objective import LseObjective

__all__ = [
    "SolverConfig",
    "SolveStatus",
    "IterationRecord",
    "SolveTrace",
    "lsemink",
    "newton_cg",
    "smnk",
    "ngd",
    "TRACE_COLUMNS",
    "write_trace_csv",
    "load_trace_csv",
]


class SolveStatus(Enum):
    GRAD_TOLERANCE_MET = "GradToleranceMet"
    STEP_TOLERANCE_MET = "StepToleranceMet"
    WORK_BUDGET_EXHAUSTED = "WorkBudgetExhausted"
    LINE_SEARCH_FAILURE = "LineSearchFailure"
    NUMERICAL_FAILURE = "NumericalFailure"


#: Statuses that mean the run did not reach a tolerance.
FAILURE_STATUSES = (
    SolveStatus.WORK_BUDGET_EXHAUSTED,
    SolveStatus.LINE_SEARCH_FAILURE,
    SolveStatus.NUMERICAL_FAILURE,
)


@dataclass
class SolverConfig:
    """Shared solver settings.

    ``max_work_units`` is a per-sweep budget: one unit buys one
    application of every term operator (or its transpose).
    """

    gtol: float = 1e-14
    xtol: float = 1e-10
    max_work_units: int = 10_000
    gamma: float = 1e-4
    beta0: float = 1.0
    max_linesearch: int = 40
    krylov: KrylovConfig = field(default_factory=KrylovConfig)

    def __post_init__(self):
        if self.gtol <= 0 or self.xtol <= 0:
            raise ValueError("gtol and xtol must be positive")
        if self.max_work_units < 1:
            raise ValueError("max_work_units must be >= 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (self.beta0 > 0 and np.isfinite(self.beta0)):
            raise ValueError(f"beta0 must be positive and finite, got {self.beta0}")
        if self.max_linesearch < 1:
            raise ValueError("max_linesearch must be >= 1")


@dataclass
class IterationRecord:
    index: int
    f: float
    grad_norm: float
    work_units: int
    shift_or_step: float
    linesearch_trials: int
    krylov_iters: int
    wall_seconds: float


@dataclass
class SolveTrace:
    records: list[IterationRecord]
    status: SolveStatus
    final_x: np.ndarray
    curvature_breakdowns: int = 0

    @property
    def final_record(self) -> IterationRecord:
        return self.records[-1]


class _BudgetExceeded(Exception):
    """Internal control flow: the work budget is spent."""


class _Run:
    """Per-run bookkeeping: work accounting, budget guard, trace records."""

    def __init__(self, obj: LseObjective, cfg: SolverConfig):
        self.obj = obj
        self.cfg = cfg
        self._start = obj.total_matvecs()
        self.budget = cfg.max_work_units * obj.num_terms
        self.t0 = time.perf_counter()
        self.records: list[IterationRecord] = []
        self.breakdowns = 0

    def work(self) -> int:
        return self.obj.total_matvecs() - self._start

    def exhausted(self) -> bool:
        return self.work() >= self.budget

    def checkpoint(self) -> None:
        if self.exhausted():
            raise _BudgetExceeded

    def guard(self, matvec):
        def guarded(v):
            self.checkpoint()
            return matvec(v)

        return guarded

    def try_evaluate(self, x):
        """Budget-checked trial evaluation; None when the point overflows."""
        self.checkpoint()
        try:
            return self.obj.evaluate(x)
        except NonFiniteError:
            return None

    def record(self, index, f, grad_norm, shift_or_step, trials, kiters):
        self.records.append(
            IterationRecord(
                index=index,
                f=float(f),
                grad_norm=float(grad_norm),
                work_units=self.work(),
                shift_or_step=float(shift_or_step),
                linesearch_trials=int(trials),
                krylov_iters=int(kiters),
                wall_seconds=time.perf_counter() - self.t0,
            )
        )


def _start_point(obj: LseObjective, x0) -> np.ndarray:
    x = np.array(x0, dtype=float)
    if x.shape != (obj.n,):
        raise DimensionMismatch(f"x0 must have length {obj.n}, got shape {x.shape}")
    return x


def _stop_status(cfg, gnorm_new, x_old, x_new):
    """Termination test after an accepted step; gradient tolerance wins."""
    if gnorm_new < cfg.gtol:
        return SolveStatus.GRAD_TOLERANCE_MET
    step = float(np.linalg.norm(x_new - x_old))
    base = float(np.linalg.norm(x_old))
    rel = step / base if base > 0 else step
    if rel < cfg.xtol:
        return SolveStatus.STEP_TOLERANCE_MET
    return None


def _armijo_accept(f_trial, f_base, predicted, strict=True):
    """Sufficient-decrease test with a float-resolution guard.

    ``predicted`` is the sufficient-decrease allowance ``gamma * grad' dx``
    (negative for descent directions).  Near a minimizer it can fall so
    far below one ulp of the objective that no representable trial value
    satisfies a strict inequality; once ``f_base + predicted`` rounds to
    ``f_base`` itself, any non-increasing trial is accepted so the
    backtracking loop cannot stall on rounding noise.
    """
    bound = f_base + predicted
    if f_trial < bound or (not strict and f_trial <= bound):
        return True
    return bound == f_base and f_trial <= f_base


def lsemink(obj: LseObjective, x0, cfg: SolverConfig | None = None, callback=None) -> SolveTrace:
    """Modified Newton-Krylov with a shift on the row-space metric.

    At each iterate the shifted system

        (hess f + beta * sum_k w_k J_k' J_k) dx = -grad f

    is solved approximately by CG from zero.  A trial step is accepted
    when ``f(x + dx) < f(x) + gamma * grad' dx``; on rejection beta is
    doubled and the system re-solved.  After acceptance beta is halved
    if the first trial succeeded, otherwise kept for the next iterate.
    Because CG never leaves the Krylov space of the gradient, all
    iterates stay in the row space of the models (shifted by ``x0``).
    """
    cfg = cfg or SolverConfig()
    x = _start_point(obj, x0)
    run = _Run(obj, cfg)
    try:
        f, state = obj.evaluate(x)
        g = obj.gradient(x, state)
    except NonFiniteError:
        return SolveTrace(run.records, SolveStatus.NUMERICAL_FAILURE, x)
    gnorm = float(np.linalg.norm(g))
    run.record(0, f, gnorm, 0.0, 0, 0)
    beta = cfg.beta0
    status = SolveStatus.NUMERICAL_FAILURE
    try:
        for i in itertools.count(1):
            if gnorm < cfg.gtol:
                status = SolveStatus.GRAD_TOLERANCE_MET
                break
            run.checkpoint()
            accepted = False
            kiters = 0
            for j in range(cfg.max_linesearch):
                shift = beta
                outcome = cg_solve(
                    run.guard(lambda v: obj.shifted_hessian_vec(state, v, shift)),
                    -g,
                    cfg.krylov,
                )
                kiters += outcome.iterations
                if outcome.termination is KrylovTermination.CURVATURE_BREAKDOWN:
                    run.breakdowns += 1
                dx = outcome.solution
                trial = run.try_evaluate(x + dx)
                if trial is not None:
                    f_new, state_new = trial
                    if _armijo_accept(f_new, f, cfg.gamma * float(g @ dx)):
                        accepted = True
                        break
                beta = 2.0 * beta
            if not accepted:
                status = SolveStatus.LINE_SEARCH_FAILURE
                break
            x_new = x + dx
            g_new = obj.gradient(x_new, state_new)
            gnorm_new = float(np.linalg.norm(g_new))
            run.record(i, f_new, gnorm_new, beta, j + 1, kiters)
            if callback is not None:
                callback(x_new.copy())
            if j == 0:
                beta = 0.5 * beta
            stop = _stop_status(cfg, gnorm_new, x, x_new)
            x, f, state, g, gnorm = x_new, f_new, state_new, g_new, gnorm_new
            if stop is not None:
                status = stop
                break
    except _BudgetExceeded:
        status = SolveStatus.WORK_BUDGET_EXHAUSTED
    except NonFiniteError:
        status = SolveStatus.NUMERICAL_FAILURE
    return SolveTrace(run.records, status, x, run.breakdowns)


def newton_cg(obj: LseObjective, x0, cfg: SolverConfig | None = None, callback=None) -> SolveTrace:
    """Newton-CG with backtracking on the step length.

    The unshifted Newton system is solved by CG; the step is then
    backtracked over ``t = 1, 1/2, 1/4, ...`` until
    ``f(x + t dx) <= f(x) + gamma t grad' dx``.  Curvature breakdowns in
    CG are counted on the trace; when the softmax saturates the Hessian
    can vanish entirely, in which case CG falls back to the
    steepest-descent direction and this method degrades to a slow
    gradient scheme instead of crashing.
    """
    cfg = cfg or SolverConfig()
    x = _start_point(obj, x0)
    run = _Run(obj, cfg)
    try:
        f, state = obj.evaluate(x)
        g = obj.gradient(x, state)
    except NonFiniteError:
        return SolveTrace(run.records, SolveStatus.NUMERICAL_FAILURE, x)
    gnorm = float(np.linalg.norm(g))
    run.record(0, f, gnorm, 0.0, 0, 0)
    status = SolveStatus.NUMERICAL_FAILURE
    try:
        for i in itertools.count(1):
            if gnorm < cfg.gtol:
                status = SolveStatus.GRAD_TOLERANCE_MET
                break
            run.checkpoint()
            outcome = cg_solve(
                run.guard(lambda v: obj.hessian_vec(state, v)), -g, cfg.krylov
            )
            if outcome.termination is KrylovTermination.CURVATURE_BREAKDOWN:
                run.breakdowns += 1
            dx = outcome.solution
            gd = float(g @ dx)
            t = 1.0
            accepted = False
            for j in range(cfg.max_linesearch):
                trial = run.try_evaluate(x + t * dx)
                if trial is not None:
                    f_new, state_new = trial
                    if _armijo_accept(f_new, f, cfg.gamma * t * gd, strict=False):
                        accepted = True
                        break
                t = 0.5 * t
            if not accepted:
                status = SolveStatus.LINE_SEARCH_FAILURE
                break
            x_new = x + t * dx
            g_new = obj.gradient(x_new, state_new)
            gnorm_new = float(np.linalg.norm(g_new))
            run.record(i, f_new, gnorm_new, t, j + 1, outcome.iterations)
            if callback is not None:
                callback(x_new.copy())
            stop = _stop_status(cfg, gnorm_new, x, x_new)
            x, f, state, g, gnorm = x_new, f_new, state_new, g_new, gnorm_new
            if stop is not None:
                status = stop
                break
    except _BudgetExceeded:
        status = SolveStatus.WORK_BUDGET_EXHAUSTED
    except NonFiniteError:
        status = SolveStatus.NUMERICAL_FAILURE
    return SolveTrace(run.records, status, x, run.breakdowns)


def smnk(obj: LseObjective, x0, cfg: SolverConfig | None = None, callback=None) -> SolveTrace:
    """Modified Newton-Krylov with an identity shift and factor reuse.

    One Lanczos factorization of the Hessian per outer iteration, seeded
    with the gradient, is reused across the shift line search: each
    trial direction ``-V (T + beta I)^{-1} V' grad`` costs a size-r
    tridiagonal solve and no operator products.  A numerically singular
    shifted system counts as a rejected trial and doubles beta.  The
    shift follows the same doubling/halving schedule as ``lsemink``.
    """
    cfg = cfg or SolverConfig()
    x = _start_point(obj, x0)
    run = _Run(obj, cfg)
    try:
        f, state = obj.evaluate(x)
        g = obj.gradient(x, state)
    except NonFiniteError:
        return SolveTrace(run.records, SolveStatus.NUMERICAL_FAILURE, x)
    gnorm = float(np.linalg.norm(g))
    run.record(0, f, gnorm, 0.0, 0, 0)
    beta = cfg.beta0
    status = SolveStatus.NUMERICAL_FAILURE
    try:
        for i in itertools.count(1):
            if gnorm < cfg.gtol:
                status = SolveStatus.GRAD_TOLERANCE_MET
                break
            run.checkpoint()
            factors = lanczos_factorize(
                run.guard(lambda v: obj.hessian_vec(state, v)), g, cfg.krylov
            )
            accepted = False
            for j in range(cfg.max_linesearch):
                try:
                    dx = lanczos_shifted_solve(factors, beta)
                except SingularTridiagonal:
                    beta = 2.0 * beta
                    continue
                trial = run.try_evaluate(x + dx)
                if trial is not None:
                    f_new, state_new = trial
                    if _armijo_accept(f_new, f, cfg.gamma * float(g @ dx)):
                        accepted = True
                        break
                beta = 2.0 * beta
            if not accepted:
                status = SolveStatus.LINE_SEARCH_FAILURE
                break
            x_new = x + dx
            g_new = obj.gradient(x_new, state_new)
            gnorm_new = float(np.linalg.norm(g_new))
            run.record(i, f_new, gnorm_new, beta, j + 1, factors.order)
            if callback is not None:
                callback(x_new.copy())
            if j == 0:
                beta = 0.5 * beta
            stop = _stop_status(cfg, gnorm_new, x, x_new)
            x, f, state, g, gnorm = x_new, f_new, state_new, g_new, gnorm_new
            if stop is not None:
                status = stop
                break
    except _BudgetExceeded:
        status = SolveStatus.WORK_BUDGET_EXHAUSTED
    except NonFiniteError:
        status = SolveStatus.NUMERICAL_FAILURE
    return SolveTrace(run.records, status, x, run.breakdowns)


def ngd(obj: LseObjective, x0, cfg: SolverConfig | None = None, callback=None) -> SolveTrace:
    """Natural gradient descent in the models-only metric.

    The direction solves ``(sum_k w_k J_k' J_k + alpha I) d = -grad f``
    by CG once per outer iteration; trial steps are ``d / lambda`` with
    the inverse step size lambda backtracked from ``beta0`` by doubling
    until the Armijo test passes.  The CG solve does not depend on
    lambda, so rejected trials only pay for objective evaluations.  With
    orthonormal models this reduces to plain gradient descent.
    """
    cfg = cfg or SolverConfig()
    x = _start_point(obj, x0)
    run = _Run(obj, cfg)
    try:
        f, state = obj.evaluate(x)
        g = obj.gradient(x, state)
    except NonFiniteError:
        return SolveTrace(run.records, SolveStatus.NUMERICAL_FAILURE, x)
    gnorm = float(np.linalg.norm(g))
    run.record(0, f, gnorm, 0.0, 0, 0)
    status = SolveStatus.NUMERICAL_FAILURE
    try:
        for i in itertools.count(1):
            if gnorm < cfg.gtol:
                status = SolveStatus.GRAD_TOLERANCE_MET
                break
            run.checkpoint()
            lam = cfg.beta0
            outcome = cg_solve(run.guard(obj.gauss_newton_vec), -g, cfg.krylov)
            if outcome.termination is KrylovTermination.CURVATURE_BREAKDOWN:
                run.breakdowns += 1
            d = outcome.solution
            gd = float(g @ d)
            accepted = False
            for j in range(cfg.max_linesearch):
                trial = run.try_evaluate(x + d / lam)
                if trial is not None:
                    f_new, state_new = trial
                    if _armijo_accept(f_new, f, cfg.gamma * gd / lam):
                        accepted = True
                        break
                lam = 2.0 * lam
            if not accepted:
                status = SolveStatus.LINE_SEARCH_FAILURE
                break
            x_new = x + d / lam
            g_new = obj.gradient(x_new, state_new)
            gnorm_new = float(np.linalg.norm(g_new))
            run.record(i, f_new, gnorm_new, lam, j + 1, outcome.iterations)
            if callback is not None:
                callback(x_new.copy())
            stop = _stop_status(cfg, gnorm_new, x, x_new)
            x, f, state, g, gnorm = x_new, f_new, state_new, g_new, gnorm_new
            if stop is not None:
                status = stop
                break
    except _BudgetExceeded:
        status = SolveStatus.WORK_BUDGET_EXHAUSTED
    except NonFiniteError:
        status = SolveStatus.NUMERICAL_FAILURE
    return SolveTrace(run.records, status, x, run.breakdowns)


TRACE_COLUMNS = (
    "iter",
    "f",
    "gnorm",
    "work_units",
    "shift_or_step",
    "ls_trials",
    "krylov_iters",
    "wall_seconds",
)


def write_trace_csv(trace: SolveTrace, path) -> None:
    """Write one row per trace record, then the status as a comment line."""
    lines = [",".join(TRACE_COLUMNS)]
    for r in trace.records:
        lines.append(
            ",".join(
                [
                    str(r.index),
                    repr(r.f),
                    repr(r.grad_norm),
                    str(r.work_units),
                    repr(r.shift_or_step),
                    str(r.linesearch_trials),
                    str(r.krylov_iters),
                    repr(r.wall_seconds),
                ]
            )
        )
    lines.append(f"# status={trace.status.value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trace_csv(path):
    """Read a trace written by :func:`write_trace_csv`.

    Returns ``(records, status_string)``.
    """
    records = []
    status = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != ",".join(TRACE_COLUMNS):
        raise ValueError(f"{path}: unexpected trace header")
    for ln in lines[1:]:
        if ln.startswith("#"):
            if ln.startswith("# status="):
                status = ln.split("=", 1)[1]
            continue
        parts = ln.split(",")
        records.append(
            IterationRecord(
                index=int(parts[0]),
                f=float(parts[1]),
                grad_norm=float(parts[2]),
                work_units=int(parts[3]),
                shift_or_step=float(parts[4]),
                linesearch_trials=int(parts[5]),
                krylov_iters=int(parts[6]),
                wall_seconds=float(parts[7]),
            )
        )
    return records, status
