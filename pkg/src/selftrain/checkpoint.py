"""Network checkpoints: versioned npz with architecture + exact parameters."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import layer_from_spec
from .network import Network

FORMAT_VERSION = 1


def save_network(net: Network, path: str | Path) -> None:
    arrays = {"format_version": np.array(FORMAT_VERSION),
              "seed": np.array(net.seed, dtype=np.uint64),
              "arch_json": np.frombuffer(
                  json.dumps({"layers": net.specs(),
                              "dtype": net.dtype.name}).encode(), dtype=np.uint8)}
    for i, layer in enumerate(net.layers):
        for name in ("weight", "bias"):
            if hasattr(layer, name):
                arrays[f"layer{i}.{name}"] = getattr(layer, name)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_network(path: str | Path) -> Network:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arch = json.loads(bytes(data["arch_json"]).decode())
        net = Network([layer_from_spec(s) for s in arch["layers"]],
                      seed=int(data["seed"]), dtype=np.dtype(arch["dtype"]),
                      init=False)
        for i, layer in enumerate(net.layers):
            for name in ("weight", "bias"):
                if hasattr(layer, name):
                    setattr(layer, name, data[f"layer{i}.{name}"].copy())
    return net
