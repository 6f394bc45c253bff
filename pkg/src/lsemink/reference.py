"""Dense reference implementations for verifying the fast paths.

Everything here is deliberately slow and coded independently of the
production kernels: matrices are materialized, the softmax comes from
scipy, extended precision goes through mpmath, and linear systems are
solved by eigendecomposition.  Intended for the test suite and for
debugging at small sizes; routines refuse to run past ``n = 400``.
"""

from __future__ import annotations

import numpy as np
import mpmath
from scipy.special import softmax as _softmax

from .errors import ScaleLimit
from .objective import LseObjective
from .operators import (
    DenseOperator,
    KroneckerLeftOperator,
    LinearOperator,
    ScaledOperator,
)

__all__ = [
    "dense_matrix",
    "dense_gradient",
    "dense_hessian",
    "dense_row_metric",
    "dense_modified_solve",
    "finite_diff_gradient",
    "finite_diff_jacobian",
    "mp_logsumexp",
]

_MAX_DENSE_DIM = 400
_PINV_CUTOFF = 1e-12


def _check_scale(n: int):
    if n > _MAX_DENSE_DIM:
        raise ScaleLimit(f"dense reference limited to n <= {_MAX_DENSE_DIM}, got {n}")


def dense_matrix(op: LinearOperator) -> np.ndarray:
    """Materialize an operator as an explicit matrix.

    Structured operators are expanded from their defining data rather
    than through their apply routines, keeping this path independent of
    the code it is used to check.
    """
    if isinstance(op, DenseOperator):
        return np.array(op.entries)
    if isinstance(op, KroneckerLeftOperator):
        return np.kron(op.feature[None, :], np.eye(op.block_dim))
    if isinstance(op, ScaledOperator):
        return op.scale * dense_matrix(op.inner)
    # fallback: probe with basis vectors
    cols = [op.apply(col) for col in np.eye(op.cols)]
    return np.column_stack(cols)


def dense_gradient(obj: LseObjective, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_scale(x.size)
    g = obj.tikhonov_alpha * x
    for term in obj.terms:
        J = dense_matrix(term.op)
        p = _softmax(J @ x + term.offset)
        g = g + term.weight * (J.T @ (p - term.target))
    return g


def dense_hessian(obj: LseObjective, x) -> np.ndarray:
    """Assemble the full Hessian, term by term."""
    x = np.asarray(x, dtype=float)
    _check_scale(x.size)
    n = x.size
    acc = obj.tikhonov_alpha * np.eye(n)
    for term in obj.terms:
        J = dense_matrix(term.op)
        p = _softmax(J @ x + term.offset)
        H = np.diag(p) - np.outer(p, p)
        acc = acc + term.weight * (J.T @ H @ J)
    return acc


def dense_row_metric(obj: LseObjective) -> np.ndarray:
    """The weighted row-space metric ``sum_k w_k J_k' J_k`` (no alpha)."""
    _check_scale(obj.n)
    acc = np.zeros((obj.n, obj.n))
    for term in obj.terms:
        J = dense_matrix(term.op)
        acc = acc + term.weight * (J.T @ J)
    return acc


def dense_modified_solve(obj: LseObjective, x, beta: float) -> np.ndarray:
    """Minimum-norm solution of the shifted Newton equation.

    Forms ``hess f(x) + beta * sum_k w_k J_k' J_k`` densely and applies
    its eigendecomposition pseudoinverse (cutoff 1e-12 of the largest
    eigenvalue) to the negated gradient.
    """
    x = np.asarray(x, dtype=float)
    _check_scale(x.size)
    A = dense_hessian(obj, x) + float(beta) * dense_row_metric(obj)
    g = dense_gradient(obj, x)
    lam, V = np.linalg.eigh(A)
    cutoff = _PINV_CUTOFF * max(float(lam.max()), 0.0)
    inv = np.where(lam > cutoff, 1.0 / np.where(lam > cutoff, lam, 1.0), 0.0)
    return -(V @ (inv * (V.T @ g)))


def finite_diff_gradient(f, x, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar field."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def finite_diff_jacobian(fn, x, h: float) -> np.ndarray:
    """Central-difference Jacobian of a vector field, one column per coordinate."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h))
    return np.column_stack(cols)


def mp_logsumexp(z, dps: int = 50) -> float:
    """log-sum-exp evaluated in extended precision."""
    with mpmath.workdps(dps):
        total = mpmath.fsum(mpmath.exp(mpmath.mpf(float(t))) for t in np.asarray(z))
        return float(mpmath.log(total))
