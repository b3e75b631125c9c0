"""Symmetric weighted contrastive loss over tempered similarity matrices.

Both branches share the form: scale the (B, B) cosine-similarity matrix by
the temperature, take the per-row weighted cross-entropy against the
diagonal in both row and column direction, and average over rows. The loss
is minimized (and reaches 0 in the distinct-target limit) when every sample
is most similar to its own target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BatchTooSmall, InvalidInput

TAU_INIT = math.log(1.0 / 0.07)


@dataclass(frozen=True)
class LossConfig:
    """Temperature is learned as a log-scale, clamped to [tau_min, tau_max]."""

    log_tau_init: float = TAU_INIT
    tau_min: float = 1.0
    tau_max: float = 100.0
    weight_v: float = 1.0
    weight_s: float = 1.0

    def __post_init__(self):
        if not (self.tau_min <= math.exp(self.log_tau_init) <= self.tau_max):
            raise InvalidInput("initial tau outside clamp bounds")
        if self.tau_min <= 0:
            raise InvalidInput("tau_min must be positive")

    def clamp_log_tau(self, log_tau: float) -> float:
        return float(np.clip(log_tau, math.log(self.tau_min), math.log(self.tau_max)))


def _log_softmax(s: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(s, axis=axis, keepdims=True)
    z = s - m
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def contrastive_loss_grads(
    f: np.ndarray, e: np.ndarray, weights: np.ndarray, tau: float
) -> tuple[float, np.ndarray, float]:
    """Loss plus gradients with respect to ``f`` rows and tau.

    loss = mean_i w_i * (-log softmax_row(S)_ii) + mean_i w_i * (-log softmax_col(S)_ii)
    with S = tau * f @ e.T.
    """
    f = np.asarray(f)
    e = np.asarray(e)
    b = f.shape[0]
    if b < 2:
        raise BatchTooSmall("contrastive loss needs at least 2 samples")
    if f.shape != e.shape:
        raise InvalidInput(f"feature/target shape mismatch {f.shape} vs {e.shape}")
    w = np.asarray(weights, dtype=f.dtype).reshape(b)

    sim = f @ e.T
    s = tau * sim
    log_p_row = _log_softmax(s, axis=1)
    log_p_col = _log_softmax(s, axis=0)
    diag = np.arange(b)
    loss = float(np.mean(w * -log_p_row[diag, diag]) + np.mean(w * -log_p_col[diag, diag]))

    p_row = np.exp(log_p_row)
    p_col = np.exp(log_p_col)
    eye = np.eye(b, dtype=f.dtype)
    ds = (w[:, None] * (p_row - eye) + w[None, :] * (p_col - eye)) / b
    d_f = (ds @ e) * tau
    d_tau = float(np.sum(ds * sim))
    return loss, d_f, d_tau


def contrastive_loss(f, e, weights, tau: float) -> float:
    """Scalar form of :func:`contrastive_loss_grads`."""
    loss, _, _ = contrastive_loss_grads(
        np.asarray(f, dtype=np.float64), np.asarray(e, dtype=np.float64), weights, tau
    )
    return loss
