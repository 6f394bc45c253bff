"""Matrix-free linear operators with adjoints and work counting.

An operator knows its shape, applies itself and its transpose to vectors,
and counts how many applications it has performed.  The counter is the
hardware-neutral cost measure used throughout the library: one unit per
matrix-vector product with a model or its transpose.

Operators are immutable after construction except for the counter, which
is lock-protected so that a single operator can be shared by concurrent
solver runs.
"""

from __future__ import annotations

import struct
import threading
from abc import ABC, abstractmethod

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

__all__ = [
    "LinearOperator",
    "DenseOperator",
    "KroneckerLeftOperator",
    "ScaledOperator",
    "identity",
    "adjoint_check",
    "save_dense",
    "load_dense",
    "dense_from_csv",
]

LSOP_MAGIC = b"LSOP"


def _as_vector(x, length: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != length:
        raise DimensionMismatch(
            f"{what} expects a vector of length {length}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"{what} received NaN or Inf entries")
    return x


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


class LinearOperator(ABC):
    """A linear map from R^cols to R^rows available only through matvecs.

    Subclasses implement ``_apply`` and ``_apply_transpose``.  The public
    ``apply``/``apply_transpose`` wrappers validate their input, perform
    the product, and advance ``matvec_counter`` by exactly one.
    """

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise DimensionMismatch(f"operator shape must be positive, got {(rows, cols)}")
        self.rows = int(rows)
        self.cols = int(cols)
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def matvec_counter(self) -> int:
        """Total number of apply and apply_transpose calls so far."""
        return self._count

    def _tick(self) -> None:
        with self._count_lock:
            self._count += 1

    def apply(self, x) -> np.ndarray:
        """Return the product of the operator with ``x``."""
        x = _as_vector(x, self.cols, f"{type(self).__name__}.apply")
        y = self._apply(x)
        self._tick()
        return y

    def apply_transpose(self, v) -> np.ndarray:
        """Return the product of the transposed operator with ``v``."""
        v = _as_vector(v, self.rows, f"{type(self).__name__}.apply_transpose")
        y = self._apply_transpose(v)
        self._tick()
        return y

    @abstractmethod
    def _apply(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _apply_transpose(self, v: np.ndarray) -> np.ndarray: ...


class DenseOperator(LinearOperator):
    """Operator backed by an explicit matrix (row-major float64)."""

    def __init__(self, entries):
        entries = np.array(entries, dtype=float, order="C")
        if entries.ndim != 2:
            raise DimensionMismatch(f"expected a 2-d matrix, got ndim={entries.ndim}")
        if not np.all(np.isfinite(entries)):
            raise NonFiniteInput("matrix entries contain NaN or Inf")
        super().__init__(entries.shape[0], entries.shape[1])
        entries.flags.writeable = False
        self._entries = entries

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    def _apply(self, x):
        return self._entries @ x

    def _apply_transpose(self, v):
        return self._entries.T @ v


class KroneckerLeftOperator(LinearOperator):
    """Rank-structured operator mapping vec(X) to X @ a for a feature vector a.

    Represents the matrix ``a^T (x) I_b`` with ``b = block_dim`` rows and
    ``b * len(a)`` columns, applied without ever materializing it.  The
    unknown is the column-major vectorization of a ``block_dim x len(a)``
    matrix, so both directions are rank-one array operations.
    """

    def __init__(self, feature, block_dim: int):
        feature = np.asarray(feature, dtype=float)
        if feature.ndim != 1 or feature.size == 0:
            raise DimensionMismatch("feature must be a non-empty vector")
        if not np.all(np.isfinite(feature)):
            raise NonFiniteInput("feature contains NaN or Inf")
        if block_dim < 1:
            raise DimensionMismatch(f"block_dim must be >= 1, got {block_dim}")
        super().__init__(int(block_dim), int(block_dim) * feature.size)
        self.feature = _frozen(feature)
        self.block_dim = int(block_dim)

    def _apply(self, x):
        X = x.reshape((self.block_dim, self.feature.size), order="F")
        return X @ self.feature

    def _apply_transpose(self, v):
        return np.outer(v, self.feature).ravel(order="F")


class ScaledOperator(LinearOperator):
    """A wrapped operator multiplied by a nonzero scalar.

    Applying advances both this operator's counter and the inner one's;
    cost accounting should read whichever operator an objective term
    references directly.
    """

    def __init__(self, inner: LinearOperator, scale: float):
        scale = float(scale)
        if scale == 0.0 or not np.isfinite(scale):
            raise ValueError(f"scale must be finite and nonzero, got {scale}")
        super().__init__(inner.rows, inner.cols)
        self.inner = inner
        self.scale = scale

    def _apply(self, x):
        return self.scale * self.inner.apply(x)

    def _apply_transpose(self, v):
        return self.scale * self.inner.apply_transpose(v)


def identity(n: int) -> DenseOperator:
    """Dense identity operator of size n."""
    return DenseOperator(np.eye(n))


def adjoint_check(op: LinearOperator, trials: int, rng_seed: int) -> float:
    """Probe adjoint consistency with random vector pairs.

    Returns the maximum over ``trials`` draws of

        |v' (J u) - (J' v)' u| / (1 + |v' (J u)|),

    which is zero up to rounding for a correctly paired apply/transpose.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.cols)
        v = rng.standard_normal(op.rows)
        left = float(v @ op.apply(u))
        right = float(op.apply_transpose(v) @ u)
        worst = max(worst, abs(left - right) / (1.0 + abs(left)))
    return worst


def save_dense(op: DenseOperator, path) -> None:
    """Write a dense operator to the binary interchange format.

    Layout: magic ``LSOP``, little-endian u32 rows and cols, then
    rows*cols little-endian float64 entries in row-major order.
    """
    header = LSOP_MAGIC + struct.pack("<II", op.rows, op.cols)
    body = np.ascontiguousarray(op.entries, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_dense(path) -> DenseOperator:
    """Read a dense operator written by :func:`save_dense`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != LSOP_MAGIC:
        raise ValueError(f"{path}: not an LSOP operator file")
    rows, cols = struct.unpack("<II", blob[4:12])
    expected = 12 + 8 * rows * cols
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    entries = np.frombuffer(blob, dtype="<f8", offset=12).reshape(rows, cols)
    return DenseOperator(entries)


def dense_from_csv(path) -> DenseOperator:
    """Import a small dense operator from a plain CSV matrix."""
    entries = np.loadtxt(path, delimiter=",", ndmin=2)
    return DenseOperator(entries)
