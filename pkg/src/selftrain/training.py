"""SGD training steps and epochs over a fixed sample set."""

from __future__ import annotations

import numpy as np

from .losses import LossConfig, loss_and_dlogits
from .network import Network
from .rng import derive, derive_array

# Key domains keep labeled-epoch masks disjoint from pseudo-epoch masks
# while letting a continued supervised run reproduce pretraining exactly.
DOMAIN_LABELED = 1
DOMAIN_PSEUDO = 2


class TrainingDiverged(RuntimeError):
    """Raised when a loss or gradient goes non-finite; aborts the epoch."""


def backward_and_step(net: Network, batch: np.ndarray, labels: np.ndarray,
                      cfg: LossConfig, lr: float, sample_keys: np.ndarray,
                      pass_index: int = 0) -> float:
    """One SGD step on a batch; returns the mean batch loss."""
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    logits, ctx = net.forward_logits_cached(batch, sample_keys, pass_index)
    loss, dlogits = loss_and_dlogits(logits, labels, cfg)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss {loss!r} (batch of {len(labels)})")
    grads = net.backward_from_dlogits(dlogits, ctx)
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient encountered")
    net.sgd_step(grads, lr)
    return loss


def train_epoch(net: Network, images: np.ndarray, labels: np.ndarray,
                cfg: LossConfig, lr: float, batch_size: int, train_seed: int,
                domain: int, epoch_ordinal: int,
                sample_indices: np.ndarray | None = None) -> float:
    """One shuffled pass over the data; returns the mean loss.

    Dropout masks are keyed by (train_seed, domain, epoch_ordinal,
    absolute sample index); the shuffle order comes from the same
    coordinates, so the epoch is a pure function of them.
    """
    n = len(labels)
    if n == 0:
        raise ValueError("cannot train on an empty sample set")
    if sample_indices is None:
        sample_indices = np.arange(n)
    epoch_seed = derive(train_seed, domain, epoch_ordinal)
    order = np.random.default_rng(epoch_seed).permutation(n)
    keys = derive_array(epoch_seed, np.asarray(sample_indices))
    total = 0.0
    for lo in range(0, n, batch_size):
        idx = order[lo:lo + batch_size]
        loss = backward_and_step(net, images[idx], labels[idx], cfg, lr,
                                 keys[idx], pass_index=0)
        total += loss * len(idx)
    return total / n
