"""Weighted log-sum-exp objectives of linear models.

The objective is

    f(x) = sum_k w_k * [ lse(J_k x + b_k) - c_k' (J_k x) ] + (alpha/2) ||x||^2

where ``lse(z) = log(sum_j exp(z_j))``, each ``J_k`` is a matrix-free
:class:`~lsemink.operators.LinearOperator`, and alpha is an optional
Tikhonov coefficient.  The gradient and Hessian-vector products are

    grad f(x)   = sum_k w_k J_k' (p_k - c_k) + alpha x
    hess f(x) v = sum_k w_k J_k' (p_k * u_k - p_k (p_k' u_k)) + alpha v

with ``p_k = softmax(J_k x + b_k)`` and ``u_k = J_k v``.  Evaluating f
caches the per-term responses so gradients and Hessian-vector products at
the same point reuse them; every extra operator application would
otherwise inflate the work accounting.

All exponentials are max-shifted, so evaluation never overflows for
finite inputs even when the responses span hundreds of units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    NonFiniteInput,
    NonFiniteValue,
    StaleCache,
)
from .operators import LinearOperator

__all__ = ["logsumexp_stable", "LinearTerm", "TermState", "EvalState", "LseObjective"]


def logsumexp_stable(z):
    """Return ``(lse(z), softmax(z))`` without overflow.

    The maximum entry is subtracted before exponentiation, so the result
    is finite for any finite input, including single entries near the
    float64 overflow threshold.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise EmptyInput("logsumexp needs a non-empty vector")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("logsumexp received NaN or Inf entries")
    shift = float(z.max())
    w = np.exp(z - shift)
    total = float(w.sum())
    return shift + float(np.log(total)), w / total


class LinearTerm:
    """One weighted log-sum-exp term: operator, offset, target, weight."""

    __slots__ = ("op", "offset", "target", "weight", "_target_dot_offset")

    def __init__(self, op: LinearOperator, offset, target, weight: float = 1.0):
        offset = np.array(offset, dtype=float)
        target = np.array(target, dtype=float)
        if offset.shape != (op.rows,) or target.shape != (op.rows,):
            raise DimensionMismatch(
                f"offset/target must have length {op.rows}, "
                f"got {offset.shape} and {target.shape}"
            )
        if not (np.all(np.isfinite(offset)) and np.all(np.isfinite(target))):
            raise NonFiniteInput("offset or target contains NaN or Inf")
        weight = float(weight)
        if not (weight > 0.0 and np.isfinite(weight)):
            raise ValueError(f"weight must be positive and finite, got {weight}")
        offset.flags.writeable = False
        target.flags.writeable = False
        self.op = op
        self.offset = offset
        self.target = target
        self.weight = weight
        self._target_dot_offset = float(target @ offset)


@dataclass
class TermState:
    """Per-term cache at a point: response z, softmax p, and lse value."""

    z: np.ndarray
    p: np.ndarray
    lse_value: float


class EvalState:
    """Evaluation cache for one point, reused by gradient and HVP calls."""

    __slots__ = ("x", "terms")

    def __init__(self, x: np.ndarray, terms: list[TermState]):
        x = np.array(x, dtype=float)
        x.flags.writeable = False
        self.x = x
        self.terms = terms

    def matches(self, x) -> bool:
        return np.array_equal(self.x, np.asarray(x, dtype=float))


class LseObjective:
    """A sum of weighted log-sum-exp terms plus optional Tikhonov penalty.

    Instances are immutable and may be shared across concurrent solver
    runs; evaluation caches are per-call and owned by the caller.
    """

    def __init__(self, terms, tikhonov_alpha: float = 0.0):
        terms = tuple(terms)
        if not terms:
            raise ValueError("objective needs at least one term")
        cols = terms[0].op.cols
        for k, term in enumerate(terms):
            if term.op.cols != cols:
                raise DimensionMismatch(
                    f"term {k} has {term.op.cols} columns, expected {cols}"
                )
        alpha = float(tikhonov_alpha)
        if not (alpha >= 0.0 and np.isfinite(alpha)):
            raise ValueError(f"tikhonov_alpha must be >= 0 and finite, got {alpha}")
        self.terms = terms
        self.tikhonov_alpha = alpha
        self._cols = cols

    @property
    def n(self) -> int:
        """Dimension of the unknown."""
        return self._cols

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def total_matvecs(self) -> int:
        """Sum of the term operators' application counters."""
        return sum(term.op.matvec_counter for term in self.terms)

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self._cols,):
            raise DimensionMismatch(
                f"point must have length {self._cols}, got shape {x.shape}"
            )
        return x

    def evaluate(self, x):
        """Return ``(f(x), state)``; costs one apply per term.

        The returned state is keyed to ``x`` and feeds :meth:`gradient`,
        :meth:`hessian_vec`, and :meth:`shifted_hessian_vec`.
        """
        x = self._check_point(x)
        value = 0.5 * self.tikhonov_alpha * float(x @ x) if self.tikhonov_alpha else 0.0
        states = []
        for term in self.terms:
            # overflow here is a handled condition (raised, and treated as a
            # rejected trial by the solvers), not worth a runtime warning
            with np.errstate(over="ignore", invalid="ignore"):
                z = term.op.apply(x) + term.offset
            if not np.all(np.isfinite(z)):
                raise NonFiniteValue("linear response overflowed to NaN or Inf")
            lse, p = logsumexp_stable(z)
            # c'(J x) assembled as c'z - c'b so the response is reused
            value += term.weight * (lse - float(term.target @ z) + term._target_dot_offset)
            states.append(TermState(z, p, lse))
        if not np.isfinite(value):
            raise NonFiniteValue(f"objective value is not finite: {value}")
        return float(value), EvalState(x, states)

    def gradient(self, x, state: EvalState) -> np.ndarray:
        """Gradient at ``x`` from a matching state; one transpose per term."""
        x = self._check_point(x)
        if not state.matches(x):
            raise StaleCache("evaluation state was computed at a different point")
        g = self.tikhonov_alpha * x if self.tikhonov_alpha else np.zeros(self._cols)
        for term, ts in zip(self.terms, state.terms):
            g = g + term.weight * term.op.apply_transpose(ts.p - term.target)
        return g

    def hessian_vec(self, state: EvalState, v) -> np.ndarray:
        """Hessian-vector product at the state's point; 2 applications per term."""
        return self.shifted_hessian_vec(state, v, 0.0)

    def shifted_hessian_vec(self, state: EvalState, v, beta: float) -> np.ndarray:
        """Product with the Hessian shifted by beta on the row-space metric.

        Computes ``(hess f + beta * sum_k w_k J_k' J_k) v`` fused, so the
        cost stays at two operator applications per term for any beta.
        """
        v = self._check_point(v)
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("hessian_vec direction contains NaN or Inf")
        beta = float(beta)
        if not (beta >= 0.0 and np.isfinite(beta)):
            raise ValueError(f"beta must be >= 0 and finite, got {beta}")
        out = self.tikhonov_alpha * v if self.tikhonov_alpha else np.zeros(self._cols)
        for term, ts in zip(self.terms, state.terms):
            u = term.op.apply(v)
            hu = ts.p * u - ts.p * float(ts.p @ u)
            if beta:
                hu = hu + beta * u
            out = out + term.weight * term.op.apply_transpose(hu)
        return out

    def gauss_newton_vec(self, v) -> np.ndarray:
        """Product with the models-only metric ``sum_k w_k J_k' J_k + alpha I``.

        This is the curvature proxy used by natural gradient descent; it
        needs no evaluation state and costs two applications per term.
        """
        v = self._check_point(v)
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("metric direction contains NaN or Inf")
        out = self.tikhonov_alpha * v if self.tikhonov_alpha else np.zeros(self._cols)
        for term in self.terms:
            out = out + term.weight * term.op.apply_transpose(term.op.apply(v))
        return out
