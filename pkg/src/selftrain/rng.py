"""Counter-based deterministic randomness for dropout masks.

Dropout masks must be a pure function of (base seed, sample index, pass
index, layer index) so that results never depend on batch boundaries or
evaluation order.  A stateful generator cannot give that guarantee, so
masks are produced by hashing those coordinates with the SplitMix64
finalizer and thresholding 16-bit lanes of the hash.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Keep probabilities are quantized to 1/65536; exact for the default 0.5.
_LANES_PER_WORD = 4
_LANE_RANGE = 1 << 16


def mix64(h: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    h &= _MASK64
    h = ((h ^ (h >> 30)) * _MIX1) & _MASK64
    h = ((h ^ (h >> 27)) * _MIX2) & _MASK64
    return h ^ (h >> 31)


def derive(seed: int, *indices: int) -> int:
    """Derive a subkey by folding indices into the seed, one mix per index."""
    h = seed & _MASK64
    for i in indices:
        h = mix64((h + ((i + 1) * _GOLDEN)) & _MASK64)
    return h


def derive_array(seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized `derive(seed, i)` for an array of indices."""
    h = np.uint64(seed) + (indices.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    return _mix64_array(h)


def _mix64_array(h: np.ndarray) -> np.ndarray:
    h = h.astype(np.uint64, copy=True)
    h ^= h >> np.uint64(30)
    h *= np.uint64(_MIX1)
    h ^= h >> np.uint64(27)
    h *= np.uint64(_MIX2)
    h ^= h >> np.uint64(31)
    return h


def _fold_array(keys: np.ndarray, index: int) -> np.ndarray:
    return _mix64_array(keys + np.uint64(((index + 1) * _GOLDEN) & _MASK64))


class MaskStream:
    """Dropout-mask source for one forward pass over a batch of samples.

    `sample_keys[i]` is the 64-bit key of batch row i (normally
    ``derive(seed, absolute_sample_index)``); `pass_index` distinguishes
    MC passes or training epochs under the same keys.
    """

    def __init__(self, sample_keys: np.ndarray, pass_index: int = 0):
        keys = np.asarray(sample_keys, dtype=np.uint64)
        if keys.ndim != 1:
            raise ValueError("sample_keys must be a 1-D array of uint64 keys")
        self._pass_keys = _fold_array(keys, pass_index)

    def __len__(self) -> int:
        return self._pass_keys.shape[0]

    def mask(self, layer_index: int, n_units: int, rate: float, dtype) -> np.ndarray:
        """Binary keep-mask of shape (batch, n_units), values 0.0 or 1.0."""
        thresh = min(int(round(rate * _LANE_RANGE)), _LANE_RANGE - 1)
        n = self._pass_keys.shape[0]
        if thresh <= 0:
            return np.ones((n, n_units), dtype=dtype)
        layer_keys = _fold_array(self._pass_keys, layer_index)
        n_words = -(-n_units // _LANES_PER_WORD)
        counters = (np.arange(1, n_words + 1, dtype=np.uint64)
                    * np.uint64(_GOLDEN))
        words = _mix64_array(layer_keys[:, None] + counters[None, :])
        lanes = words.view(np.uint16).reshape(n, n_words * _LANES_PER_WORD)
        return (lanes[:, :n_units] >= np.uint16(thresh)).astype(dtype)
