"""Checkpoint round-trips must be exact."""

import numpy as np
import pytest

from selftrain.checkpoint import load_network, save_network
from selftrain.network import build_convnet, build_mlp

from test_network import small_convnet


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_round_trip_exact(tmp_path, dtype):
    net = build_convnet(seed=42, dtype=dtype)
    path = tmp_path / "net.npz"
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.dtype == net.dtype
    assert loaded.specs() == net.specs()
    for a, b in zip(net.params(), loaded.params()):
        assert a.dtype == b.dtype
        np.testing.assert_array_equal(a, b)


def test_round_trip_preserves_forward(tmp_path):
    net = small_convnet(seed=9)
    path = tmp_path / "net.npz"
    save_network(net, path)
    loaded = load_network(path)
    x = np.random.default_rng(0).random((2, 1, 12, 12))
    np.testing.assert_array_equal(net.forward(x), loaded.forward(x))


def test_mlp_round_trip(tmp_path):
    net = build_mlp(seed=3, in_features=5, num_classes=4)
    save_network(net, tmp_path / "m.npz")
    loaded = load_network(tmp_path / "m.npz")
    for a, b in zip(net.params(), loaded.params()):
        np.testing.assert_array_equal(a, b)


def test_version_guard(tmp_path):
    net = build_mlp(seed=3, in_features=2, num_classes=2)
    path = tmp_path / "m.npz"
    save_network(net, path)
    blob = dict(np.load(path))
    blob["format_version"] = np.array(99)
    with open(path, "wb") as f:
        np.savez(f, **blob)
    with pytest.raises(ValueError, match="version"):
        load_network(path)
