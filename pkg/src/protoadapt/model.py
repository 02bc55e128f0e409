"""Softmax linear probe over fixed embedding features.

Logits are scaled inner products between unit-norm feature rows and one
weight row per class; probabilities come from a max-subtracted row softmax.
The cross-entropy here is the plain sum over samples (not the mean), and
`ce_gradient` is its exact analytic gradient, so the two can be checked
against each other with finite differences.

All in-memory math is float64; see `data` for the float32 file layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

# Unit-norm tolerance for feature and prototype rows.
NORM_ATOL = 1e-6

# Probabilities are clamped here before log so a hard zero cannot
# produce -inf in the cross-entropy.
PROB_FLOOR = 1e-300


def l2_normalize_rows(a: np.ndarray) -> np.ndarray:
    """Return a copy of `a` with each row scaled to unit Euclidean norm."""
    a = np.asarray(a, dtype=np.float64)
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("cannot normalize a zero row")
    return a / norms


@dataclass
class FeatureSet:
    """N embedding rows with one integer label per row.

    Rows are expected to be unit-norm once `normalized()` has been applied;
    the file loader normalizes by default. N == 0 is representable so that
    degenerate limits (regularizer-only objectives) can be expressed, but
    loaders and trainers reject empty sets.
    """

    features: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64, values in [0, C)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} feature rows"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.n > 0 and self.labels.min() < 0:
            raise DataError("labels must be non-negative")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def validate_labels(self, n_classes: int) -> None:
        if self.n > 0 and self.labels.max() >= n_classes:
            raise DataError(
                f"label {int(self.labels.max())} out of range for {n_classes} classes"
            )

    def normalized(self) -> "FeatureSet":
        return FeatureSet(l2_normalize_rows(self.features), self.labels)

    def rows_unit_norm(self) -> bool:
        norms = np.linalg.norm(self.features, axis=1)
        return bool(np.all(np.abs(norms - 1.0) <= NORM_ATOL))

    def subset(self, indices: np.ndarray) -> "FeatureSet":
        return FeatureSet(self.features[indices], self.labels[indices])

    @staticmethod
    def empty(dim: int) -> "FeatureSet":
        return FeatureSet(np.zeros((0, dim)), np.zeros(0, dtype=np.int64))


@dataclass
class Prototypes:
    """One unit-norm embedding row per class (C >= 2)."""

    matrix: np.ndarray  # (C, D) float64
    class_names: list[str] | None = None

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ShapeError(f"prototype matrix must be 2-D, got {self.matrix.shape}")
        if self.matrix.shape[0] < 2:
            raise DataError("need at least 2 class prototypes")
        if not np.all(np.isfinite(self.matrix)):
            raise DataError("prototypes contain non-finite values")
        if self.class_names is not None and len(self.class_names) != self.matrix.shape[0]:
            raise ShapeError("class_names length does not match prototype count")

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def normalized(self) -> "Prototypes":
        return Prototypes(l2_normalize_rows(self.matrix), self.class_names)

    def rows_unit_norm(self) -> bool:
        norms = np.linalg.norm(self.matrix, axis=1)
        return bool(np.all(np.abs(norms - 1.0) <= NORM_ATOL))


def logits(w: np.ndarray, x: FeatureSet, scale: float) -> np.ndarray:
    """Scaled inner-product logits, entry (n, c) = scale * <x_n, w_c>."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != x.dim:
        raise ShapeError(
            f"weight shape {w.shape} incompatible with feature dim {x.dim}"
        )
    return scale * (x.features @ w.T)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-subtracted for numerical stability.

    Rows sum to 1 within 1e-9 for any finite input; non-finite input is
    rejected rather than propagated.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise DataError("softmax input contains non-finite values")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(p: np.ndarray, labels: np.ndarray) -> float:
    """Sum over samples of -log p[n, labels[n]].

    The sum (not the mean) keeps the value additive over disjoint sample
    sets. Probabilities below PROB_FLOOR are clamped before the log.
    """
    p = np.asarray(p, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if p.shape[0] == 0:
        return 0.0
    if labels.shape != (p.shape[0],):
        raise ShapeError("labels do not match probability rows")
    if labels.min() < 0 or labels.max() >= p.shape[1]:
        raise DataError("label out of range for probability columns")
    picked = p[np.arange(p.shape[0]), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).sum())


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    y = np.zeros((labels.shape[0], n_classes))
    if labels.shape[0]:
        y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def ce_gradient(w: np.ndarray, x: FeatureSet, labels: np.ndarray, scale: float) -> np.ndarray:
    """Gradient of cross_entropy(softmax_rows(logits(...))) w.r.t. w.

    Equals scale * (P - Y)^T X with P the predicted probabilities and Y the
    one-hot labels; shape (C, D).
    """
    w = np.asarray(w, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.n == 0:
        return np.zeros_like(w)
    p = softmax_rows(logits(w, x, scale))
    if labels.shape != (x.n,):
        raise ShapeError("labels do not match feature rows")
    if labels.min() < 0 or labels.max() >= w.shape[0]:
        raise DataError("label out of range for weight rows")
    diff = p - one_hot(labels, w.shape[0])
    return scale * (diff.T @ x.features)


def predict_point(w: np.ndarray, x: FeatureSet, scale: float) -> np.ndarray:
    """Softmax probabilities under a single weight matrix, shape (N, C).

    With w set to the class prototypes this is the zero-shot classifier.
    """
    return softmax_rows(logits(w, x, scale))
