"""Softmax, entropy, and the entropy-regularized cross-entropy loss.

The training objective is  CE(p, y) - w * H(p)  where w is the entropy
weight: positive w penalizes over-confident predictions, negative w
penalizes uncertain ones, zero gives plain cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossConfig:
    entropy_weight: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.entropy_weight <= 1.0:
            raise ValueError(
                f"entropy_weight must be in [-1, 1], got {self.entropy_weight}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max-subtracted, never overflows)."""
    z = np.asarray(logits, dtype=np.asarray(logits).dtype)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def entropy(p: np.ndarray) -> float | np.ndarray:
    """Shannon entropy in nats, with 0*ln(0) taken as 0."""
    p = np.asarray(p)
    terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def cross_entropy(p: np.ndarray, label: int) -> float:
    p = np.asarray(p)
    if not 0 <= label < p.shape[-1]:
        raise ValueError(f"label {label} out of range for {p.shape[-1]} classes")
    return float(-np.log(p[..., label]))


def loss_value(p: np.ndarray, label: int, cfg: LossConfig) -> float:
    """CE - w*H on a single probability vector; decomposition is exact."""
    return cross_entropy(p, label) - cfg.entropy_weight * float(entropy(p))


def loss_and_dlogits(logits: np.ndarray, labels: np.ndarray,
                     cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the logits.

    Computed from logits via log-softmax for stability; the gradient of
    the entropy term is  w * p * (log p + H(p))  added to the usual
    (p - onehot) cross-entropy gradient.
    """
    z = np.asarray(logits)
    n, c = z.shape
    labels = np.asarray(labels)
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    p = np.exp(logp)
    rows = np.arange(n)
    ce = -logp[rows, labels]
    h = -(p * logp).sum(axis=1)
    w = cfg.entropy_weight
    loss = float(np.mean(ce - w * h))

    dlogits = p.copy()
    dlogits[rows, labels] -= 1.0
    if w != 0.0:
        dlogits += w * p * (logp + h[:, None])
    dlogits /= n
    return loss, dlogits.astype(z.dtype, copy=False)
