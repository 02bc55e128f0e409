"""SGD with heavy-ball momentum, cosine learning-rate decay, and the
linear KL-annealing schedule shared by both trainers.

Schedules are evaluated per optimizer step, not per epoch.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParamError, ShapeError


def cosine_lr(base_lr: float, t: int, total_steps: int) -> float:
    """base_lr * (1 + cos(pi * t / T)) / 2; reaches 0 at t == T."""
    if total_steps < 1:
        raise ParamError("total_steps must be >= 1")
    if t < 0 or t > total_steps:
        raise ParamError(f"step {t} outside [0, {total_steps}]")
    return base_lr * (1.0 + math.cos(math.pi * t / total_steps)) / 2.0


def anneal_beta(t: int, total_steps: int, mode: str) -> float:
    """KL weight for step t: linear ramp (t+1)/T, or constant 1."""
    if mode == "none":
        return 1.0
    if mode != "linear":
        raise ParamError(f"unknown anneal mode {mode!r}")
    if total_steps < 1:
        raise ParamError("total_steps must be >= 1")
    if t < 0 or t >= total_steps:
        raise ParamError(f"step {t} outside [0, {total_steps})")
    return (t + 1) / total_steps


class SgdState:
    """Velocity buffers and step counter for one training run."""

    def __init__(self, param_shapes, momentum: float, total_steps: int):
        if not 0.0 <= momentum < 1.0:
            raise ParamError("momentum must be in [0, 1)")
        self.velocity = [np.zeros(s) for s in param_shapes]
        self.momentum = momentum
        self.t = 0
        self.total_steps = total_steps


def sgd_step(params, grads, state: SgdState, lr: float):
    """One heavy-ball update: v <- mu*v + g, p <- p - lr*v.

    Returns the updated parameter arrays; the state's velocity buffers and
    step counter are updated in place.
    """
    if len(params) != len(state.velocity) or len(grads) != len(params):
        raise ShapeError("parameter/gradient/velocity counts differ")
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.velocity[i].shape:
            raise ShapeError(f"block {i}: shapes {p.shape}/{g.shape} differ")
        state.velocity[i] = state.momentum * state.velocity[i] + g
        out.append(p - lr * state.velocity[i])
    state.t += 1
    return out
