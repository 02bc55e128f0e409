"""Deterministic point-estimate adapter.

Minimizes the sum of the cross-entropy over the support set and a per-class
quadratic pull of each weight row toward its class prototype:

    sum_n CE(y_n, softmax(scale * x_n . W^T)) + sum_c lambda_c ||w_c - t_c||^2

The objective and gradient are exposed in this raw sum form. The trainer
steps on the gradient divided by the support-set size, which is the usual
batch-mean convention the default learning rate (0.1) is calibrated for;
the minimizer is unchanged.

Because the quadratic term has a known curvature (2 * lambda_c per weight
entry, before the mean normalization), the cosine-decayed learning rate is
additionally capped at the classical stability bound of that curvature.
Without the cap, a tight prior (large lambda) turns gradient descent into a
divergent oscillation at any fixed step size; with it, prior-dominated
configurations simply pin the weights to the prototypes, which is the
correct limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParamError, ShapeError
from .model import FeatureSet, Prototypes, ce_gradient, cross_entropy, logits, softmax_rows
from .optim import SgdState, cosine_lr, sgd_step
from .rng import STREAM_TRAIN_MAP, make_rng


@dataclass
class MapConfig:
    """Hyperparameters for the point-estimate trainer.

    `lambdas` may be a scalar (applied to every class) or a length-C vector.
    When None, it defaults to 1 / (2 * prior_std**2), which makes the
    objective the exact negative log-joint of the Gaussian-prior model used
    by the Bayesian adapter.
    """

    lambdas: np.ndarray | float | None = None
    prior_std: float = 0.01
    epochs: int = 300
    batch_size: int = 256
    lr: float = 0.1
    momentum: float = 0.9
    seed: int = 0
    scale: float = 30.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ParamError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ParamError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ParamError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParamError("momentum must be in [0, 1)")
        if self.prior_std <= 0:
            raise ParamError("prior_std must be > 0")

    def lambda_vector(self, n_classes: int) -> np.ndarray:
        if self.lambdas is None:
            lam = np.full(n_classes, 1.0 / (2.0 * self.prior_std**2))
        else:
            lam = np.asarray(self.lambdas, dtype=np.float64)
            if lam.ndim == 0:
                lam = np.full(n_classes, float(lam))
        if lam.shape != (n_classes,):
            raise ShapeError(f"lambdas shape {lam.shape} != ({n_classes},)")
        if np.any(lam < 0):
            raise ParamError("lambdas must be non-negative")
        return lam


def map_objective(
    w: np.ndarray, data: FeatureSet, protos: Prototypes, cfg: MapConfig
) -> float:
    """CE sum over `data` plus sum_c lambda_c ||w_c - t_c||^2."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != protos.matrix.shape:
        raise ShapeError(f"weights {w.shape} vs prototypes {protos.matrix.shape}")
    data.validate_labels(protos.n_classes)
    lam = cfg.lambda_vector(protos.n_classes)
    ce = 0.0
    if data.n > 0:
        ce = cross_entropy(softmax_rows(logits(w, data, cfg.scale)), data.labels)
    dev = w - protos.matrix
    return ce + float(lam @ (dev * dev).sum(axis=1))


def map_gradient(
    w: np.ndarray, data: FeatureSet, protos: Prototypes, cfg: MapConfig
) -> np.ndarray:
    """Gradient of map_objective w.r.t. w: CE gradient + 2*lambda_c*(w_c - t_c)."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != protos.matrix.shape:
        raise ShapeError(f"weights {w.shape} vs prototypes {protos.matrix.shape}")
    lam = cfg.lambda_vector(protos.n_classes)
    grad = ce_gradient(w, data, data.labels, cfg.scale)
    grad += 2.0 * lam[:, None] * (w - protos.matrix)
    return grad


def train_map(
    data: FeatureSet, protos: Prototypes, cfg: MapConfig
) -> tuple[np.ndarray, list[float]]:
    """Minibatch SGD-momentum from w = T with a cosine-decayed step size.

    Returns the final weight matrix and the per-epoch average of the full
    objective estimate. Deterministic for a fixed config and seed.
    """
    if data.n < 1:
        raise ShapeError("training data is empty")
    data.validate_labels(protos.n_classes)
    if data.dim != protos.dim:
        raise ShapeError(f"feature dim {data.dim} vs prototype dim {protos.dim}")

    lam = cfg.lambda_vector(protos.n_classes)
    w = protos.matrix.copy()
    n = data.n
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = max(cfg.epochs * n_batches, 1)
    state = SgdState([w.shape], cfg.momentum, total_steps)
    rng = make_rng(cfg.seed, STREAM_TRAIN_MAP)
    trajectory: list[float] = []

    # Stability bound for the normalized quadratic term (curvature 2*lam/n).
    lam_max = float(lam.max())
    lr_cap = n / (2.0 * lam_max) if lam_max > 0 else np.inf

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_obj = 0.0
        for b in range(n_batches):
            batch = data.subset(perm[b * cfg.batch_size : (b + 1) * cfg.batch_size])
            ce = cross_entropy(softmax_rows(logits(w, batch, cfg.scale)), batch.labels)
            dev = w - protos.matrix
            reg = float(lam @ (dev * dev).sum(axis=1))
            obj = (n / batch.n) * ce + reg
            if not np.isfinite(obj):
                raise DivergenceError(epoch)
            epoch_obj += obj

            grad = (n / batch.n) * ce_gradient(w, batch, batch.labels, cfg.scale)
            grad += 2.0 * lam[:, None] * dev
            lr_t = min(cosine_lr(cfg.lr, state.t, total_steps), lr_cap)
            (w,) = sgd_step([w], [grad / n], state, lr_t)
        trajectory.append(epoch_obj / n_batches)

    return w, trajectory
