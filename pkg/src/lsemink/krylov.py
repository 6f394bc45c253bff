"""Krylov-subspace solvers for the symmetric Newton systems.

``cg_solve`` runs conjugate gradients from the zero vector, so every
iterate lies in the Krylov space generated by the right-hand side; the
outer solvers rely on that to keep updates inside the row space of the
linear models.  ``lanczos_factorize`` builds an orthonormal basis with
full reorthogonalization and the tridiagonal projection of the operator,
after which ``lanczos_shifted_solve`` produces an update direction for
any diagonal shift at the cost of a tridiagonal solve, with no new
operator applications.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NonFiniteValue, SingularTridiagonal, ZeroRhs

__all__ = [
    "KrylovConfig",
    "KrylovOutcome",
    "KrylovTermination",
    "LanczosFactors",
    "cg_solve",
    "lanczos_factorize",
    "lanczos_shifted_solve",
]

# Happy-breakdown threshold relative to the seed norm.
_BREAKDOWN_RTOL = 1e-14
# Pivot magnitude below which a shifted tridiagonal solve is refused.
_PIVOT_FLOOR = 1e-14


class KrylovTermination(Enum):
    TOLERANCE_MET = "ToleranceMet"
    MAX_ITER = "MaxIter"
    CURVATURE_BREAKDOWN = "CurvatureBreakdown"
    ZERO_RHS = "ZeroRhs"


@dataclass
class KrylovConfig:
    """Inner-solver tolerances shared by CG and Lanczos."""

    ktol: float = 1e-3
    kmaxiter: int = 20
    curvature_floor: float = 1e-14

    def __post_init__(self):
        if not (0.0 < self.ktol < 1.0):
            raise ValueError(f"ktol must lie in (0, 1), got {self.ktol}")
        if self.kmaxiter < 1:
            raise ValueError(f"kmaxiter must be >= 1, got {self.kmaxiter}")
        if self.curvature_floor < 0:
            raise ValueError("curvature_floor must be >= 0")


@dataclass
class KrylovOutcome:
    solution: np.ndarray
    rel_residual: float
    iterations: int
    termination: KrylovTermination


@dataclass
class LanczosFactors:
    """Orthonormal basis and tridiagonal projection of a symmetric operator.

    ``basis`` is n-by-r with orthonormal columns; the projection is a
    symmetric tridiagonal matrix stored as its main diagonal and first
    off-diagonal.  ``rhs_norm`` is the norm of the seed vector.
    """

    basis: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    rhs_norm: float

    @property
    def order(self) -> int:
        return self.diag.size


def cg_solve(matvec, rhs, cfg: KrylovConfig) -> KrylovOutcome:
    """Approximately solve ``A s = rhs`` for symmetric PSD ``A``.

    Starts from zero, stops when the recurrence residual drops below
    ``ktol * ||rhs||`` or after ``kmaxiter`` iterations.  If a search
    direction exposes curvature at or below the floor, the current
    iterate is returned with ``CurvatureBreakdown``; if that happens
    before any progress, the right-hand side itself is returned, which
    is the steepest-descent direction when ``rhs`` is the negated
    gradient of the outer problem.
    """
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return KrylovOutcome(np.zeros_like(rhs), 0.0, 0, KrylovTermination.ZERO_RHS)

    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = rhs.copy()
    rr = rhs_norm * rhs_norm
    for k in range(cfg.kmaxiter):
        ap = np.asarray(matvec(p), dtype=float)
        pap = float(p @ ap)
        if not np.isfinite(pap):
            raise NonFiniteValue("curvature product is NaN or Inf")
        if pap <= cfg.curvature_floor * float(p @ p):
            if k == 0:
                return KrylovOutcome(
                    rhs.copy(), 1.0, 0, KrylovTermination.CURVATURE_BREAKDOWN
                )
            return KrylovOutcome(
                x, np.sqrt(rr) / rhs_norm, k, KrylovTermination.CURVATURE_BREAKDOWN
            )
        alpha = rr / pap
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = float(r @ r)
        if not np.isfinite(rr_new):
            raise NonFiniteValue("residual norm is NaN or Inf")
        if np.sqrt(rr_new) <= cfg.ktol * rhs_norm:
            return KrylovOutcome(
                x, np.sqrt(rr_new) / rhs_norm, k + 1, KrylovTermination.TOLERANCE_MET
            )
        p = r + (rr_new / rr) * p
        rr = rr_new
    return KrylovOutcome(
        x, np.sqrt(rr) / rhs_norm, cfg.kmaxiter, KrylovTermination.MAX_ITER
    )


def _solve_tridiagonal(diag, offdiag, rhs):
    """Solve a symmetric tridiagonal system by elimination.

    Raises SingularTridiagonal when a pivot magnitude falls below the
    floor, signalling the caller to increase its shift.
    """
    n = diag.size
    c = np.zeros(max(n - 1, 0))
    d = np.zeros(n)
    pivot = diag[0]
    if abs(pivot) < _PIVOT_FLOOR:
        raise SingularTridiagonal(f"pivot {pivot} below {_PIVOT_FLOOR}")
    if n > 1:
        c[0] = offdiag[0] / pivot
    d[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - offdiag[i - 1] * c[i - 1]
        if abs(pivot) < _PIVOT_FLOOR:
            raise SingularTridiagonal(f"pivot {pivot} below {_PIVOT_FLOOR}")
        if i < n - 1:
            c[i] = offdiag[i] / pivot
        d[i] = (rhs[i] - offdiag[i - 1] * d[i - 1]) / pivot
    y = np.zeros(n)
    y[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        y[i] = d[i] - c[i] * y[i + 1]
    return y


def lanczos_factorize(matvec, rhs, cfg: KrylovConfig) -> LanczosFactors:
    """Tridiagonalize a symmetric operator on the Krylov space of ``rhs``.

    Builds at most ``kmaxiter`` basis vectors with full
    reorthogonalization.  Stops early on an invariant subspace (the next
    residual norm falls below 1e-14 of the seed norm) or once the
    implied CG relative residual of the unshifted system drops below
    ``ktol``.
    """
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        raise ZeroRhs("cannot factorize on a zero seed vector")

    vectors = [rhs / rhs_norm]
    diag: list[float] = []
    offdiag: list[float] = []
    for j in range(cfg.kmaxiter):
        w = np.asarray(matvec(vectors[j]), dtype=float)
        if not np.all(np.isfinite(w)):
            raise NonFiniteValue("operator product is NaN or Inf")
        a = float(vectors[j] @ w)
        diag.append(a)
        w = w - a * vectors[j]
        if j > 0:
            w = w - offdiag[j - 1] * vectors[j - 1]
        # two full passes remove the drift that would corrupt shift reuse
        for _ in range(2):
            for u in vectors:
                w = w - float(u @ w) * u
        b = float(np.linalg.norm(w))
        if b <= _BREAKDOWN_RTOL * rhs_norm:
            break
        e1 = np.zeros(len(diag))
        e1[0] = rhs_norm
        try:
            y = _solve_tridiagonal(np.asarray(diag), np.asarray(offdiag), e1)
        except SingularTridiagonal:
            y = None
        if y is not None and b * abs(y[-1]) <= cfg.ktol * rhs_norm:
            break
        if j + 1 == cfg.kmaxiter:
            break
        offdiag.append(b)
        vectors.append(w / b)
    return LanczosFactors(
        np.column_stack(vectors), np.asarray(diag), np.asarray(offdiag), rhs_norm
    )


def lanczos_shifted_solve(factors: LanczosFactors, beta: float) -> np.ndarray:
    """Update direction for a diagonal shift, reusing the factorization.

    Returns ``-V (T + beta I)^{-1} V' rhs`` where ``V, T`` are the stored
    basis and tridiagonal projection; seeding the factorization with the
    gradient therefore yields a descent direction.  The cost is a single
    tridiagonal solve of size r.
    """
    beta = float(beta)
    e1 = np.zeros(factors.order)
    e1[0] = factors.rhs_norm
    y = _solve_tridiagonal(factors.diag + beta, factors.offdiag, e1)
    return -(factors.basis @ y)
