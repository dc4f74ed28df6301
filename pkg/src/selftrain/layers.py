"""Layer implementations: conv, dense, relu, max-pool, dropout, softmax.

Forward passes are pure given a ForwardContext; training caches whatever
the backward pass needs in the context.  Convolutions are valid (no
padding), stride 1, lowered to matrix products via im2col.
"""

from __future__ import annotations

import numpy as np

from .losses import softmax as _softmax
from .rng import MaskStream


class ShapeError(ValueError):
    """Input shape incompatible with a layer; message names the layer."""


class ForwardContext:
    """Per-call state for one forward pass.

    mode: "eval" (deterministic, dropout scales by keep prob) or
    "masked" (binary dropout masks from `stream`; training and MC).
    When `cache` is a dict, layers store what backward() needs.
    """

    def __init__(self, mode: str = "eval", stream: MaskStream | None = None,
                 cache: dict | None = None):
        if mode not in ("eval", "masked"):
            raise ValueError(f"unknown forward mode {mode!r}")
        if mode == "masked" and stream is None:
            raise ValueError("masked mode requires a MaskStream")
        self.mode = mode
        self.stream = stream
        self.cache = cache

    @property
    def training(self) -> bool:
        return self.cache is not None


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(N, C, H, W) -> (N, OH*OW, C*k*k) patch matrix, OH = H-k+1."""
    n, c, h, w = x.shape
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    # win: (N, C, OH, OW, k, k) -> (N, OH, OW, C, k, k)
    patches = win.transpose(0, 2, 3, 1, 4, 5)
    oh, ow = h - k + 1, w - k + 1
    return patches.reshape(n, oh * ow, c * k * k)


class Layer:
    index: int = -1  # position in the network stack, set by Network

    def params(self) -> list[np.ndarray]:
        return []

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        pass

    def spec(self) -> dict:
        raise NotImplementedError

    def _err(self, msg: str) -> ShapeError:
        return ShapeError(f"layer {self.index} ({type(self).__name__}): {msg}")


class Conv2D(Layer):
    def __init__(self, in_channels: int, out_channels: int, kernel: int):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.weight = None
        self.bias = None
        self.first_layer = False  # skip input gradient when True

    def init_params(self, rng, dtype):
        k = self.kernel
        fan_in = self.in_channels * k * k
        bound = np.sqrt(6.0 / fan_in)
        shape = (self.out_channels, self.in_channels, k, k)
        self.weight = rng.uniform(-bound, bound, size=shape).astype(dtype)
        self.bias = np.zeros(self.out_channels, dtype=dtype)

    def params(self):
        return [self.weight, self.bias]

    def spec(self):
        return {"type": "conv2d", "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel": self.kernel}

    def forward(self, x: np.ndarray, ctx: ForwardContext) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise self._err(f"expected (N, {self.in_channels}, H, W), got {x.shape}")
        k = self.kernel
        n, _, h, w = x.shape
        if h < k or w < k:
            raise self._err(f"input {h}x{w} smaller than {k}x{k} kernel")
        oh, ow = h - k + 1, w - k + 1
        patches = _im2col(x, k)
        wmat = self.weight.reshape(self.out_channels, -1)
        out = patches @ wmat.T + self.bias
        if ctx.training:
            ctx.cache[self.index] = (patches, (n, h, w))
        return out.transpose(0, 2, 1).reshape(n, self.out_channels, oh, ow)

    def backward(self, dout: np.ndarray, ctx: ForwardContext):
        patches, (n, h, w) = ctx.cache[self.index]
        k = self.kernel
        oc = self.out_channels
        dmat = dout.reshape(n, oc, -1).transpose(0, 2, 1)  # (N, P, OC)
        f = patches.shape[-1]
        dw = (patches.reshape(-1, f).T @ dmat.reshape(-1, oc)).T
        grads = [dw.reshape(self.weight.shape), dmat.sum(axis=(0, 1))]
        if self.first_layer:
            return None, grads
        # Input gradient: full correlation of dout with the flipped kernel.
        oh, ow = h - k + 1, w - k + 1
        padded = np.zeros((n, oc, h + k - 1, w + k - 1), dtype=dout.dtype)
        padded[:, :, k - 1:k - 1 + oh, k - 1:k - 1 + ow] = dout.reshape(n, oc, oh, ow)
        dpatches = _im2col(padded, k)
        wrot = self.weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        dx = dpatches @ wrot.reshape(self.in_channels, -1).T
        return dx.transpose(0, 2, 1).reshape(n, self.in_channels, h, w), grads


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = None
        self.bias = None

    def init_params(self, rng, dtype):
        bound = np.sqrt(6.0 / self.in_features)
        self.weight = rng.uniform(
            -bound, bound, size=(self.in_features, self.out_features)).astype(dtype)
        self.bias = np.zeros(self.out_features, dtype=dtype)

    def params(self):
        return [self.weight, self.bias]

    def spec(self):
        return {"type": "dense", "in_features": self.in_features,
                "out_features": self.out_features}

    def forward(self, x, ctx):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise self._err(f"expected (N, {self.in_features}), got {x.shape}")
        if ctx.training:
            ctx.cache[self.index] = x
        return x @ self.weight + self.bias

    def backward(self, dout, ctx):
        x = ctx.cache[self.index]
        grads = [x.T @ dout, dout.sum(axis=0)]
        return dout @ self.weight.T, grads


class ReLU(Layer):
    def spec(self):
        return {"type": "relu"}

    def forward(self, x, ctx):
        out = np.maximum(x, 0)
        if ctx.training:
            ctx.cache[self.index] = x > 0
        return out

    def backward(self, dout, ctx):
        return dout * ctx.cache[self.index], []


class MaxPool2x2(Layer):
    def spec(self):
        return {"type": "maxpool2x2"}

    def forward(self, x, ctx):
        if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
            raise self._err(f"expected (N, C, even H, even W), got {x.shape}")
        n, c, h, w = x.shape
        tiles = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        tiles = tiles.reshape(n, c, h // 2, w // 2, 4)
        which = tiles.argmax(axis=-1)
        out = np.take_along_axis(tiles, which[..., None], axis=-1)[..., 0]
        if ctx.training:
            ctx.cache[self.index] = (which, (n, c, h, w))
        return out

    def backward(self, dout, ctx):
        which, (n, c, h, w) = ctx.cache[self.index]
        dtiles = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
        np.put_along_axis(dtiles, which[..., None], dout[..., None], axis=-1)
        dx = dtiles.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(n, c, h, w), []


class Flatten(Layer):
    def spec(self):
        return {"type": "flatten"}

    def forward(self, x, ctx):
        if ctx.training:
            ctx.cache[self.index] = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout, ctx):
        return dout.reshape(ctx.cache[self.index]), []


class Dropout(Layer):
    """Non-inverted dropout: masked modes zero units with probability
    `rate` (no rescale); eval mode scales activations by the keep
    probability instead."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def spec(self):
        return {"type": "dropout", "rate": self.rate}

    def forward(self, x, ctx):
        if ctx.mode == "eval":
            return x * x.dtype.type(1.0 - self.rate)
        n_units = int(np.prod(x.shape[1:]))
        if len(ctx.stream) != x.shape[0]:
            raise self._err(
                f"mask stream has {len(ctx.stream)} keys for batch of {x.shape[0]}")
        mask = ctx.stream.mask(self.index, n_units, self.rate, x.dtype)
        mask = mask.reshape(x.shape)
        if ctx.training:
            ctx.cache[self.index] = mask
        return x * mask

    def backward(self, dout, ctx):
        return dout * ctx.cache[self.index], []


class Softmax(Layer):
    """Terminal probability layer.  Training uses the fused loss gradient
    w.r.t. logits, so backward() exists only for completeness."""

    def spec(self):
        return {"type": "softmax"}

    def forward(self, x, ctx):
        if x.ndim != 2:
            raise self._err(f"expected (N, C) logits, got {x.shape}")
        out = _softmax(x)
        if ctx.training:
            ctx.cache[self.index] = out
        return out

    def backward(self, dout, ctx):
        p = ctx.cache[self.index]
        inner = (dout * p).sum(axis=1, keepdims=True)
        return p * (dout - inner), []


_LAYER_TYPES = {
    "conv2d": lambda s: Conv2D(s["in_channels"], s["out_channels"], s["kernel"]),
    "dense": lambda s: Dense(s["in_features"], s["out_features"]),
    "relu": lambda s: ReLU(),
    "maxpool2x2": lambda s: MaxPool2x2(),
    "flatten": lambda s: Flatten(),
    "dropout": lambda s: Dropout(s["rate"]),
    "softmax": lambda s: Softmax(),
}


def layer_from_spec(spec: dict) -> Layer:
    try:
        factory = _LAYER_TYPES[spec["type"]]
    except KeyError:
        raise ValueError(f"unknown layer type {spec.get('type')!r}") from None
    return factory(spec)
