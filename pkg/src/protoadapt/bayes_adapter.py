"""Variational Gaussian adapter over the softmax linear probe.

The weight matrix gets a Gaussian prior centered on the class prototypes
with one shared variance per class, and a Gaussian posterior of the same
block-diagonal shape whose mean and per-class log-std are learned. Training
minimizes the negative ELBO,

    sum_n E_q[CE(y_n, softmax(scale * x_n . W^T))] + KL(q || prior),

with the expectation estimated by reparametrized Monte Carlo draws
(w = mean + std * eps) and the KL in closed form. Gradients are analytic:
the mean block accumulates the CE gradient at each sampled weight matrix,
the log-std block the pathwise term (CE gradient * eps * std), both plus
the closed-form KL gradients.

Minibatch CE is rescaled by full_n / batch_n so the stochastic objective
is an unbiased estimate of the full sum; as in the point-estimate trainer,
the optimizer steps on the gradient divided by full_n, and the cosine
learning rate is capped at the stability bound of the KL term's known
curvature (beta / prior_std^2 per mean entry before normalization). The
cap is what makes near-delta priors behave correctly: instead of a
divergent oscillation, the posterior mean simply stays pinned to the
prototypes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParamError, ShapeError
from .model import (
    FeatureSet,
    Prototypes,
    ce_gradient,
    cross_entropy,
    logits,
    predict_point,
    softmax_rows,
)
from .optim import SgdState, anneal_beta, cosine_lr, sgd_step
from .rng import STREAM_PREDICT, STREAM_TRAIN_BAYES, make_rng


@dataclass
class GaussianPrior:
    """Per-class isotropic Gaussian over weight rows, centered on prototypes."""

    mean: np.ndarray  # (C, D)
    std: np.ndarray  # (C,), shared across the D dims of each class

    def __post_init__(self):
        self.mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        self.std = np.ascontiguousarray(self.std, dtype=np.float64)
        if self.mean.ndim != 2:
            raise ShapeError("prior mean must be 2-D")
        if self.std.shape != (self.mean.shape[0],):
            raise ShapeError("prior std must have one entry per class")
        if np.any(self.std <= 0) or not np.all(np.isfinite(self.std)):
            raise ParamError("prior std must be positive and finite")

    @staticmethod
    def from_prototypes(protos: Prototypes, prior_std: float) -> "GaussianPrior":
        return GaussianPrior(
            protos.matrix.copy(), np.full(protos.n_classes, float(prior_std))
        )


@dataclass
class VariationalPosterior:
    """Gaussian posterior: mean matrix plus per-class log standard deviation."""

    mean: np.ndarray  # (C, D)
    log_std: np.ndarray  # (C,)

    def __post_init__(self):
        self.mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        self.log_std = np.ascontiguousarray(self.log_std, dtype=np.float64)
        if self.mean.ndim != 2:
            raise ShapeError("posterior mean must be 2-D")
        if self.log_std.shape != (self.mean.shape[0],):
            raise ShapeError("posterior log_std must have one entry per class")
        if not np.all(np.isfinite(self.log_std)):
            raise ParamError("posterior log_std must be finite")

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


@dataclass
class BayesConfig:
    epochs: int = 300
    batch_size: int = 256
    lr: float = 0.1
    momentum: float = 0.9
    s_mc_train: int = 3
    s_mc_predict: int = 100
    prior_std: float = 0.01
    seed: int = 0
    scale: float = 30.0
    kl_anneal: str = "linear"  # "linear" or "none"

    def __post_init__(self):
        if self.epochs < 0:
            raise ParamError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ParamError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ParamError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParamError("momentum must be in [0, 1)")
        if self.s_mc_train < 1 or self.s_mc_predict < 1:
            raise ParamError("MC sample counts must be >= 1")
        if self.prior_std <= 0:
            raise ParamError("prior_std must be > 0")
        if self.kl_anneal not in ("linear", "none"):
            raise ParamError(f"unknown kl_anneal mode {self.kl_anneal!r}")


def _check_match(q: VariationalPosterior, p: GaussianPrior) -> None:
    if q.mean.shape != p.mean.shape:
        raise ShapeError(f"posterior {q.mean.shape} vs prior {p.mean.shape}")


def kl_diag_gaussian(q: VariationalPosterior, p: GaussianPrior) -> float:
    """Closed-form KL(q || p) for the per-class diagonal Gaussians.

    Per class and dimension:
        log(std_p / std_q) + (std_q^2 + (mean_q - mean_p)^2) / (2 std_p^2) - 1/2
    """
    _check_match(q, p)
    d = q.mean.shape[1]
    sq2 = np.exp(2.0 * q.log_std)
    sp2 = p.std**2
    dev2 = ((q.mean - p.mean) ** 2).sum(axis=1)
    per_class = d * (np.log(p.std) - q.log_std) + (d * sq2 + dev2) / (2.0 * sp2) - d / 2.0
    return float(per_class.sum())


def kl_gradients(
    q: VariationalPosterior, p: GaussianPrior
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of kl_diag_gaussian w.r.t. the posterior mean and log-std."""
    _check_match(q, p)
    d = q.mean.shape[1]
    g_mean = (q.mean - p.mean) / (p.std**2)[:, None]
    g_log_std = d * (np.exp(2.0 * q.log_std) / p.std**2 - 1.0)
    return g_mean, g_log_std


def sample_weights(q: VariationalPosterior, eps: np.ndarray) -> np.ndarray:
    """Reparametrized draw: mean + std * eps, deterministic given eps."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != q.mean.shape:
        raise ShapeError(f"eps shape {eps.shape} != {q.mean.shape}")
    return q.mean + q.std[:, None] * eps


def _ce_terms(q, batch, full_n, eps_list, scale, want_grad):
    """Shared CE value/gradient accumulation over the eps draws."""
    c, d = q.mean.shape
    sigma = q.std
    ce_mean = 0.0
    g_mean = np.zeros((c, d)) if want_grad else None
    g_log_std = np.zeros(c) if want_grad else None
    scale_n = 0.0 if batch.n == 0 else full_n / batch.n
    for eps in eps_list:
        w = sample_weights(q, eps)
        if batch.n == 0:
            continue
        ce = cross_entropy(softmax_rows(logits(w, batch, scale)), batch.labels)
        ce_mean += scale_n * ce
        if want_grad:
            g = scale_n * ce_gradient(w, batch, batch.labels, scale)
            g_mean += g
            g_log_std += (g * np.asarray(eps)).sum(axis=1) * sigma
    s = len(eps_list)
    ce_mean /= s
    if want_grad:
        g_mean /= s
        g_log_std /= s
    return ce_mean, g_mean, g_log_std


def neg_elbo(
    q: VariationalPosterior,
    prior: GaussianPrior,
    batch: FeatureSet,
    full_n: int,
    eps_list: list[np.ndarray],
    beta: float,
    scale: float,
) -> float:
    """(full_n / batch_n) * mean CE over the draws + beta * KL(q || prior)."""
    if len(eps_list) == 0:
        raise ParamError("need at least one eps draw")
    _check_match(q, prior)
    batch.validate_labels(q.mean.shape[0])
    ce_mean, _, _ = _ce_terms(q, batch, full_n, eps_list, scale, want_grad=False)
    return ce_mean + beta * kl_diag_gaussian(q, prior)


def neg_elbo_gradient(
    q: VariationalPosterior,
    prior: GaussianPrior,
    batch: FeatureSet,
    full_n: int,
    eps_list: list[np.ndarray],
    beta: float,
    scale: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Pathwise gradients of neg_elbo at fixed eps draws.

    Returns (d/d mean, d/d log_std). Matches central finite differences of
    neg_elbo when the same eps_list is reused on both sides.
    """
    if len(eps_list) == 0:
        raise ParamError("need at least one eps draw")
    _check_match(q, prior)
    batch.validate_labels(q.mean.shape[0])
    _, g_mean, g_log_std = _ce_terms(q, batch, full_n, eps_list, scale, want_grad=True)
    klm, kls = kl_gradients(q, prior)
    return g_mean + beta * klm, g_log_std + beta * kls


def log_prior(w: np.ndarray, prior: GaussianPrior) -> float:
    """Normalized Gaussian log-density of a weight matrix under the prior."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != prior.mean.shape:
        raise ShapeError(f"weights {w.shape} vs prior mean {prior.mean.shape}")
    d = prior.mean.shape[1]
    dev2 = ((w - prior.mean) ** 2).sum(axis=1)
    per_class = -0.5 * dev2 / prior.std**2 - d * (
        0.5 * math.log(2.0 * math.pi) + np.log(prior.std)
    )
    return float(per_class.sum())


def neg_log_joint(
    w: np.ndarray, data: FeatureSet, prior: GaussianPrior, scale: float
) -> float:
    """-log p(Y | W, X) - log p(W); the MAP objective up to a constant."""
    ce = 0.0
    if data.n > 0:
        ce = cross_entropy(softmax_rows(logits(w, data, scale)), data.labels)
    return ce - log_prior(w, prior)


def neg_log_joint_grad(
    w: np.ndarray, data: FeatureSet, prior: GaussianPrior, scale: float
) -> np.ndarray:
    """Gradient of neg_log_joint: CE gradient + (w - mean) / std^2."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != prior.mean.shape:
        raise ShapeError(f"weights {w.shape} vs prior mean {prior.mean.shape}")
    grad = ce_gradient(w, data, data.labels, scale)
    grad += (w - prior.mean) / (prior.std**2)[:, None]
    return grad


def train_bayes(
    data: FeatureSet, protos: Prototypes, cfg: BayesConfig
) -> tuple[VariationalPosterior, list[dict[str, float]]]:
    """Minibatch SGD-momentum on (mean, log_std) with fresh draws per step.

    The posterior mean starts at the prototypes and the posterior std at the
    prior std. Returns the trained posterior and a per-epoch trajectory with
    the annealed training objective and the beta = 1 negative ELBO, both
    averaged over the epoch's steps. Trajectory values are computed with one
    fixed set of monitor draws (common random numbers) so the curve tracks
    the iterate instead of per-step sampling noise; gradient steps use fresh
    draws.
    """
    if data.n < 1:
        raise ShapeError("training data is empty")
    data.validate_labels(protos.n_classes)
    if data.dim != protos.dim:
        raise ShapeError(f"feature dim {data.dim} vs prototype dim {protos.dim}")

    prior = GaussianPrior.from_prototypes(protos, cfg.prior_std)
    q = VariationalPosterior(
        protos.matrix.copy(), np.full(protos.n_classes, math.log(cfg.prior_std))
    )
    n = data.n
    c, d = protos.matrix.shape
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = max(cfg.epochs * n_batches, 1)
    state = SgdState([(c, d), (c,)], cfg.momentum, total_steps)
    rng = make_rng(cfg.seed, STREAM_TRAIN_BAYES)
    monitor_eps = [rng.standard_normal((c, d)) for _ in range(cfg.s_mc_train)]
    trajectory: list[dict[str, float]] = []

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_obj = 0.0
        epoch_elbo = 0.0
        for b in range(n_batches):
            batch = data.subset(perm[b * cfg.batch_size : (b + 1) * cfg.batch_size])
            eps_list = [rng.standard_normal((c, d)) for _ in range(cfg.s_mc_train)]
            beta = anneal_beta(state.t, total_steps, cfg.kl_anneal)

            ce_mean, g_mean, g_log_std = _ce_terms(
                q, batch, n, eps_list, cfg.scale, want_grad=True
            )
            kl = kl_diag_gaussian(q, prior)
            obj = ce_mean + beta * kl
            if not np.isfinite(obj):
                raise DivergenceError(epoch)
            ce_monitor, _, _ = _ce_terms(
                q, batch, n, monitor_eps, cfg.scale, want_grad=False
            )
            epoch_obj += ce_monitor + beta * kl
            epoch_elbo += ce_monitor + kl

            klm, kls = kl_gradients(q, prior)
            # Stability bound for the normalized KL pull on the mean block
            # (curvature beta / (prior_std^2 * n)).
            lr_cap = n * float(prior.std.min()) ** 2 / beta
            lr_t = min(cosine_lr(cfg.lr, state.t, total_steps), lr_cap)
            new_mean, new_log_std = sgd_step(
                [q.mean, q.log_std],
                [(g_mean + beta * klm) / n, (g_log_std + beta * kls) / n],
                state,
                lr_t,
            )
            q = VariationalPosterior(new_mean, new_log_std)
        trajectory.append(
            {"objective": epoch_obj / n_batches, "neg_elbo": epoch_elbo / n_batches}
        )

    return q, trajectory


def predict_bayes(
    q: VariationalPosterior,
    x: FeatureSet,
    s_mc_predict: int,
    seed: int,
    scale: float,
) -> np.ndarray:
    """Softmax probabilities averaged over sampled weight matrices.

    One weight draw classifies every row, and the average runs in a fixed
    sequential order, so the result is reproducible bit-for-bit per seed.
    """
    if s_mc_predict < 1:
        raise ParamError("s_mc_predict must be >= 1")
    if x.dim != q.mean.shape[1]:
        raise ShapeError(f"feature dim {x.dim} vs posterior dim {q.mean.shape[1]}")
    rng = make_rng(seed, STREAM_PREDICT)
    acc = np.zeros((x.n, q.mean.shape[0]))
    for _ in range(s_mc_predict):
        w = sample_weights(q, rng.standard_normal(q.mean.shape))
        acc += softmax_rows(logits(w, x, scale))
    return acc / s_mc_predict


__all__ = [
    "BayesConfig",
    "GaussianPrior",
    "VariationalPosterior",
    "kl_diag_gaussian",
    "kl_gradients",
    "sample_weights",
    "neg_elbo",
    "neg_elbo_gradient",
    "log_prior",
    "neg_log_joint",
    "neg_log_joint_grad",
    "train_bayes",
    "predict_bayes",
    "predict_point",
]
