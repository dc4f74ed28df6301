"""The classifier network: an ordered layer stack ending in softmax.

The default architecture is 2 convolutional layers, 2 fully connected
layers, and a terminal softmax; a plain MLP builder exists for
low-dimensional synthetic data.  All parameters are initialized from the
network seed (uniform He-style fan-in scaling), so identical (seed,
architecture, dtype) gives bit-identical parameters.
"""

from __future__ import annotations

import numpy as np

from .layers import (Conv2D, Dense, Dropout, Flatten, ForwardContext, Layer,
                     MaxPool2x2, ReLU, Softmax, layer_from_spec)
from .rng import MaskStream, derive_array


class Network:
    def __init__(self, layers: list[Layer], seed: int, dtype=np.float64,
                 init: bool = True):
        if not layers or not isinstance(layers[-1], Softmax):
            raise ValueError("network must end in a Softmax layer")
        self.layers = layers
        self.seed = seed
        self.dtype = np.dtype(dtype)
        for i, layer in enumerate(layers):
            layer.index = i
        for layer in layers:
            if isinstance(layer, Conv2D):
                layer.first_layer = layer.index == 0
        if init:
            rng = np.random.default_rng(seed)
            for layer in layers:
                layer.init_params(rng, self.dtype)

    # -- introspection -------------------------------------------------

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    def clone(self) -> "Network":
        net = Network([layer_from_spec(s) for s in self.specs()],
                      seed=self.seed, dtype=self.dtype, init=False)
        for mine, theirs in zip(self.layers, net.layers):
            for name in ("weight", "bias"):
                if hasattr(mine, name):
                    setattr(theirs, name, getattr(mine, name).copy())
        return net

    # -- forward passes ------------------------------------------------

    def _run(self, x: np.ndarray, ctx: ForwardContext, upto: int | None = None,
             start: int = 0) -> np.ndarray:
        out = np.ascontiguousarray(x, dtype=self.dtype)
        stop = len(self.layers) if upto is None else upto
        for layer in self.layers[start:stop]:
            out = layer.forward(out, ctx)
        return out

    def forward(self, x: np.ndarray, mode: str = "eval",
                sample_keys: np.ndarray | None = None,
                pass_index: int = 0) -> np.ndarray:
        """Softmax probabilities for a batch.

        mode "eval": deterministic, dropout replaced by keep-prob scaling.
        mode "mc" / "train": binary dropout masks keyed by
        (sample_keys[i], pass_index, layer index); callers supply one key
        per batch row so results are independent of batching.
        """
        if mode == "eval":
            ctx = ForwardContext("eval")
        elif mode in ("mc", "train"):
            if sample_keys is None:
                raise ValueError(f"mode {mode!r} requires sample_keys")
            stream = MaskStream(np.asarray(sample_keys, dtype=np.uint64),
                                pass_index)
            ctx = ForwardContext("masked", stream)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return self._run(x, ctx)

    def forward_logits_cached(self, x: np.ndarray, sample_keys: np.ndarray,
                              pass_index: int) -> tuple[np.ndarray, ForwardContext]:
        """Masked forward through everything but the softmax, caching for
        backward.  Used by the training step (fused softmax gradient)."""
        stream = MaskStream(np.asarray(sample_keys, dtype=np.uint64), pass_index)
        ctx = ForwardContext("masked", stream, cache={})
        logits = self._run(x, ctx, upto=len(self.layers) - 1)
        return logits, ctx

    def backward_from_dlogits(self, dlogits: np.ndarray,
                              ctx: ForwardContext) -> list[np.ndarray]:
        """Backprop through the cached pass; returns grads aligned with
        params().  The terminal softmax is skipped (fused into the loss)."""
        grads_rev = []
        d = dlogits
        for layer in reversed(self.layers[:-1]):
            d, layer_grads = layer.backward(d, ctx)
            grads_rev.extend(reversed(layer_grads))
        return list(reversed(grads_rev))

    def sgd_step(self, grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(self.params(), grads):
            p -= self.dtype.type(lr) * g


def mc_sample_keys(seed: int, sample_indices: np.ndarray) -> np.ndarray:
    """Per-sample mask keys for MC passes: derive(seed, absolute index)."""
    return derive_array(seed, np.asarray(sample_indices))


def build_convnet(seed: int, num_classes: int = 10, in_channels: int = 1,
                  input_hw: tuple[int, int] = (28, 28),
                  conv_channels: tuple[int, int] = (8, 16), kernel: int = 5,
                  fc_width: int = 128, dropout_rate: float = 0.5,
                  dtype=np.float64) -> Network:
    """Default classifier: conv-pool-dropout twice, then two dense layers."""
    h, w = input_hw
    c1, c2 = conv_channels
    h1, w1 = (h - kernel + 1) // 2, (w - kernel + 1) // 2
    h2, w2 = (h1 - kernel + 1) // 2, (w1 - kernel + 1) // 2
    flat = c2 * h2 * w2
    layers = [
        Conv2D(in_channels, c1, kernel), ReLU(), MaxPool2x2(), Dropout(dropout_rate),
        Conv2D(c1, c2, kernel), ReLU(), MaxPool2x2(), Dropout(dropout_rate),
        Flatten(),
        Dense(flat, fc_width), ReLU(), Dropout(dropout_rate),
        Dense(fc_width, num_classes),
        Softmax(),
    ]
    return Network(layers, seed=seed, dtype=dtype)


def build_mlp(seed: int, in_features: int, num_classes: int,
              hidden: tuple[int, ...] = (32,), dropout_rate: float = 0.5,
              dtype=np.float64) -> Network:
    """Small dense network for vector-valued (synthetic) inputs."""
    layers: list[Layer] = []
    prev = in_features
    for width in hidden:
        layers += [Dense(prev, width), ReLU(), Dropout(dropout_rate)]
        prev = width
    layers += [Dense(prev, num_classes), Softmax()]
    return Network(layers, seed=seed, dtype=dtype)
