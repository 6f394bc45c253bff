"""Problem generators: smoothed max minimization and softmax classification.

Two families are provided.  The first smooths a piecewise-linear maximum,

    f(x) = eta * log( sum_j exp( ((J x + b) / eta)_j ) ),

which converges to ``max(J x + b)`` as eta shrinks and becomes nearly
nonsmooth for small eta; it is the classic stress test from geometric
programming.  The second is multinomial logistic regression over
per-sample rank-structured operators ``a_k' (x) I`` acting on the
vectorized classifier weights.  Both reduce to
:class:`~lsemink.objective.LseObjective` instances, so all solvers see a
single code path.

Datasets come either from a seeded synthetic generator (Gaussian class
clusters pushed through a random-feature map) or from MNIST files in the
IDX format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    DimensionMismatch,
    EmptyDataset,
    InvalidEta,
    TruncatedFile,
)
from .objective import LinearTerm, LseObjective
from .operators import DenseOperator, KroneckerLeftOperator, ScaledOperator, load_dense, save_dense

__all__ = [
    "GpInstance",
    "make_gp_instance",
    "make_gp",
    "save_gp_instance",
    "load_gp_instance",
    "MlrDataset",
    "RfmExtractor",
    "make_rfm",
    "apply_rfm",
    "make_mlr",
    "make_synthetic_classification",
    "load_mnist_idx",
    "classification_accuracy",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MNIST_CLASSES = 10


@dataclass
class GpInstance:
    """A smoothed-max instance: dense model, offset, smoothing, and seed."""

    matrix: np.ndarray
    offset: np.ndarray
    eta: float
    seed: int

    def to_objective(self) -> LseObjective:
        """Fresh objective over this instance's data.

        Scaling the operator by 1/eta, the offset by 1/eta, and the term
        weight by eta realizes ``eta * lse((J x + b) / eta)`` with the
        generic machinery; each call returns new operators with zeroed
        work counters over the same arrays.
        """
        op = ScaledOperator(DenseOperator(self.matrix), 1.0 / self.eta)
        term = LinearTerm(
            op,
            offset=self.offset / self.eta,
            target=np.zeros(self.matrix.shape[0]),
            weight=self.eta,
        )
        return LseObjective([term])


def make_gp_instance(m: int, n: int, eta: float, seed: int) -> GpInstance:
    """Draw a smoothed-max instance with standard normal entries."""
    if eta <= 0 or not np.isfinite(eta):
        raise InvalidEta(f"eta must be positive, got {eta}")
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((m, n))
    offset = rng.standard_normal(m)
    return GpInstance(matrix, offset, float(eta), int(seed))


def make_gp(m: int, n: int, eta: float, seed: int) -> LseObjective:
    """Seeded smoothed-max objective (see :class:`GpInstance`)."""
    return make_gp_instance(m, n, eta, seed).to_objective()


def save_gp_instance(inst: GpInstance, directory) -> None:
    """Dump an instance for reproducibility: model binary plus metadata JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_dense(DenseOperator(inst.matrix), directory / "operator.lsop")
    meta = {
        "rows": int(inst.matrix.shape[0]),
        "cols": int(inst.matrix.shape[1]),
        "eta": inst.eta,
        "seed": inst.seed,
        "offset": [float(v) for v in inst.offset],
    }
    (directory / "instance.json").write_text(json.dumps(meta, indent=2))


def load_gp_instance(directory) -> GpInstance:
    directory = Path(directory)
    meta = json.loads((directory / "instance.json").read_text())
    matrix = load_dense(directory / "operator.lsop").entries
    return GpInstance(
        np.array(matrix), np.asarray(meta["offset"], dtype=float), meta["eta"], meta["seed"]
    )


class MlrDataset:
    """Feature vectors with one-hot labels for softmax classification."""

    def __init__(self, features, labels):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or labels.ndim != 2:
            raise DimensionMismatch("features and labels must be 2-d arrays")
        if features.shape[0] != labels.shape[0]:
            raise CountMismatch(
                f"{features.shape[0]} feature rows vs {labels.shape[0]} label rows"
            )
        if features.shape[0] == 0:
            raise EmptyDataset("dataset has no samples")
        onehot = np.isin(labels, (0.0, 1.0)).all() and np.allclose(labels.sum(axis=1), 1.0)
        if not onehot:
            raise ValueError("labels must be one-hot rows")
        self.features = features
        self.labels = labels

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]


@dataclass
class RfmExtractor:
    """Random feature map: ``y -> relu(Z y + bias)``."""

    weights: np.ndarray
    bias: np.ndarray
    seed: int

    @property
    def output_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.input_dim,):
            raise DimensionMismatch(
                f"expected input of length {self.input_dim}, got shape {y.shape}"
            )
        return np.maximum(0.0, self.weights @ y + self.bias)

    def transform_dataset(self, data: MlrDataset) -> MlrDataset:
        """Propagate every sample, keeping the labels."""
        lifted = np.maximum(0.0, data.features @ self.weights.T + self.bias)
        return MlrDataset(lifted, data.labels)


def make_rfm(output_dim: int, input_dim: int, seed: int) -> RfmExtractor:
    """Seeded extractor; weights scaled by 1/sqrt(input_dim) to keep
    pre-activations O(1)."""
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((output_dim, input_dim)) / np.sqrt(input_dim)
    bias = rng.standard_normal(output_dim)
    return RfmExtractor(weights, bias, int(seed))


def apply_rfm(ext: RfmExtractor, y) -> np.ndarray:
    """Functional alias for :meth:`RfmExtractor.apply`."""
    return ext.apply(y)


def make_mlr(data: MlrDataset, tikhonov_alpha: float = 0.0) -> LseObjective:
    """Average multinomial logistic loss as a log-sum-exp objective.

    One term per sample with operator ``a_k' (x) I_{num_classes}``,
    target equal to the one-hot label, and weight ``1/N``; the unknown
    has dimension ``num_classes * feature_dim``.  Fresh operators per
    call, so each solver run gets private work counters.
    """
    n_c = data.num_classes
    zero = np.zeros(n_c)
    terms = [
        LinearTerm(
            KroneckerLeftOperator(data.features[k], n_c),
            offset=zero,
            target=data.labels[k],
            weight=1.0 / data.num_samples,
        )
        for k in range(data.num_samples)
    ]
    return LseObjective(terms, tikhonov_alpha=tikhonov_alpha)


def make_synthetic_classification(
    num_samples: int, input_dim: int, num_classes: int, feature_dim: int, seed: int
) -> MlrDataset:
    """Seeded stand-in for an image dataset.

    Class means are drawn normal scaled by 3, samples are unit-variance
    normal around their class mean with uniformly random classes, and
    the result is pushed through a fresh random feature map of size
    ``feature_dim``.  Deterministic per seed.
    """
    if num_samples < 1 or input_dim < 1 or feature_dim < 1:
        raise ValueError("all dimensions must be >= 1")
    if num_classes < 2:
        raise ValueError(f"need at least two classes, got {num_classes}")
    rng = np.random.default_rng(seed)
    means = 3.0 * rng.standard_normal((num_classes, input_dim))
    classes = rng.integers(0, num_classes, size=num_samples)
    raw = means[classes] + rng.standard_normal((num_samples, input_dim))
    labels = np.zeros((num_samples, num_classes))
    labels[np.arange(num_samples), classes] = 1.0
    ext = RfmExtractor(
        rng.standard_normal((feature_dim, input_dim)) / np.sqrt(input_dim),
        rng.standard_normal(feature_dim),
        int(seed),
    )
    return ext.transform_dataset(MlrDataset(raw, labels))


def _read_be_u32(blob: bytes, offset: int, path) -> int:
    if offset + 4 > len(blob):
        raise TruncatedFile(f"{path}: header ends early")
    return struct.unpack_from(">I", blob, offset)[0]


def load_mnist_idx(images_path, labels_path, limit: int) -> MlrDataset:
    """Parse an MNIST-style IDX image/label file pair.

    Big-endian headers: images carry magic 0x00000803 then count, rows,
    cols; labels carry magic 0x00000801 then count; payloads are
    unsigned bytes.  Pixels are scaled to [0, 1] and labels one-hot
    encoded over ten classes.  At most ``limit`` samples are kept.
    """
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    with open(images_path, "rb") as fh:
        img_blob = fh.read()
    with open(labels_path, "rb") as fh:
        lab_blob = fh.read()

    magic = _read_be_u32(img_blob, 0, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"{images_path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
    img_count = _read_be_u32(img_blob, 4, images_path)
    rows = _read_be_u32(img_blob, 8, images_path)
    cols = _read_be_u32(img_blob, 12, images_path)
    if len(img_blob) < 16 + img_count * rows * cols:
        raise TruncatedFile(f"{images_path}: pixel payload ends early")

    magic = _read_be_u32(lab_blob, 0, labels_path)
    if magic != IDX_LABELS_MAGIC:
        raise BadMagic(f"{labels_path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
    lab_count = _read_be_u32(lab_blob, 4, labels_path)
    if len(lab_blob) < 8 + lab_count:
        raise TruncatedFile(f"{labels_path}: label payload ends early")
    if img_count != lab_count:
        raise CountMismatch(f"{img_count} images vs {lab_count} labels")

    keep = min(limit, img_count)
    pixels = np.frombuffer(img_blob, dtype=np.uint8, count=keep * rows * cols, offset=16)
    features = pixels.reshape(keep, rows * cols).astype(float) / 255.0
    digits = np.frombuffer(lab_blob, dtype=np.uint8, count=keep, offset=8)
    if digits.size and digits.max() >= MNIST_CLASSES:
        raise ValueError(f"{labels_path}: label {digits.max()} out of range")
    labels = np.zeros((keep, MNIST_CLASSES))
    labels[np.arange(keep), digits] = 1.0
    return MlrDataset(features, labels)


def classification_accuracy(x, data: MlrDataset) -> float:
    """Fraction of samples whose argmax score matches the label.

    ``x`` is the column-major vectorization of the num_classes-by-
    feature_dim weight matrix, as optimized by :func:`make_mlr`.
    """
    x = np.asarray(x, dtype=float)
    n_c, n_p = data.num_classes, data.feature_dim
    if x.shape != (n_c * n_p,):
        raise DimensionMismatch(f"x must have length {n_c * n_p}, got shape {x.shape}")
    X = x.reshape((n_c, n_p), order="F")
    predicted = np.argmax(data.features @ X.T, axis=1)
    actual = np.argmax(data.labels, axis=1)
    return float(np.mean(predicted == actual))
