"""MC-dropout inference: repeated stochastic forward passes per sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Dropout, ForwardContext
from .network import Network
from .rng import MaskStream

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class MCPredictions:
    """K stochastic softmax outputs for one sample, one row per pass."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError(f"expected a (K, C) matrix, got shape {s.shape}")
        if np.any(s < -ROW_SUM_TOL) or np.any(s > 1 + ROW_SUM_TOL):
            raise ValueError("probabilities outside [0, 1]")
        tol = ROW_SUM_TOL if s.dtype == np.float64 else 1e-5
        if np.any(np.abs(s.sum(axis=1) - 1.0) > tol):
            raise ValueError("rows must sum to 1")

    @property
    def n_passes(self) -> int:
        return self.samples.shape[0]

    @property
    def n_classes(self) -> int:
        return self.samples.shape[1]

    def class_means(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=np.float64).mean(axis=0)

    def row_argmaxes(self) -> np.ndarray:
        return np.asarray(self.samples).argmax(axis=1)


def mc_predict(net: Network, x: np.ndarray, n_passes: int, seed: int) -> MCPredictions:
    """MC-dropout prediction for a single sample.

    Pass k uses masks keyed by (seed, k, layer), so the result is
    reproducible from the seed and identical to what a pooled pass
    computes for this sample under the same per-sample key.
    """
    if n_passes < 1:
        raise ValueError("n_passes must be >= 1")
    x = np.asarray(x)
    rows = mc_predict_pool(net, x[None], n_passes,
                           np.array([seed], dtype=np.uint64))
    return MCPredictions(rows[0])


def mc_predict_pool(net: Network, images: np.ndarray, n_passes: int,
                    sample_keys: np.ndarray, chunk_size: int = 512) -> np.ndarray:
    """MC-dropout over a pool: (N, K, C) probabilities.

    The stack prefix before the first dropout layer is deterministic, so
    it is computed once per chunk and only the suffix is re-run per pass.
    Masks are keyed per sample, so chunking never changes which units drop;
    identical calls are bit-exact, while different batch shapes may differ
    by BLAS accumulation order (about one ulp).
    """
    sample_keys = np.asarray(sample_keys, dtype=np.uint64)
    n = images.shape[0]
    if n != sample_keys.shape[0]:
        raise ValueError("one sample key per pool row required")
    split = next((i for i, l in enumerate(net.layers) if isinstance(l, Dropout)),
                 len(net.layers))
    n_classes = net.layers[-2].out_features
    out = np.empty((n, n_passes, n_classes), dtype=net.dtype)
    for lo in range(0, n, chunk_size):
        hi = min(lo + chunk_size, n)
        chunk = images[lo:hi]
        prefix = net._run(chunk, ForwardContext("eval"), upto=split)
        for k in range(n_passes):
            stream = MaskStream(sample_keys[lo:hi], pass_index=k)
            ctx = ForwardContext("masked", stream)
            out[lo:hi, k] = net._run(prefix, ctx, start=split)
    return out
