"""Network forward modes, shape errors, and the gradient check."""

import numpy as np
import pytest

from selftrain.layers import (Conv2D, Dense, Dropout, Flatten, MaxPool2x2,
                              ReLU, ShapeError, Softmax)
from selftrain.losses import LossConfig, loss_and_dlogits
from selftrain.network import Network, build_convnet, build_mlp
from selftrain.rng import derive_array
from selftrain.training import TrainingDiverged, backward_and_step


def small_convnet(seed=7, dtype=np.float64):
    # under 2k parameters, still exercising every layer type
    return Network([Conv2D(1, 2, 3), ReLU(), MaxPool2x2(), Dropout(0.5),
                    Conv2D(2, 3, 3), ReLU(), Flatten(),
                    Dense(27, 8), ReLU(), Dropout(0.5), Dense(8, 5),
                    Softmax()], seed=seed, dtype=dtype)


def test_default_architecture_shape():
    net = build_convnet(seed=0)
    kinds = [type(l).__name__ for l in net.layers]
    assert kinds.count("Conv2D") == 2
    assert kinds.count("Dense") == 2
    assert kinds[-1] == "Softmax"
    x = np.zeros((2, 1, 28, 28))
    assert net.forward(x).shape == (2, 10)


def test_zero_weight_network_predicts_uniform():
    net = build_convnet(seed=0)
    for layer in net.layers:
        for p in layer.params():
            p[...] = 0.0
    rng = np.random.default_rng(5)
    p = net.forward(rng.random((3, 1, 28, 28)))
    np.testing.assert_allclose(p, np.full((3, 10), 0.1), atol=1e-15)


def test_same_seed_same_params():
    a = build_convnet(seed=123)
    b = build_convnet(seed=123)
    for pa, pb in zip(a.params(), b.params()):
        np.testing.assert_array_equal(pa, pb)


def test_mc_mode_deterministic_given_seed():
    net = small_convnet()
    x = np.random.default_rng(0).random((2, 1, 12, 12))
    keys = np.array([11, 22], dtype=np.uint64)
    p1 = net.forward(x, mode="mc", sample_keys=keys, pass_index=3)
    p2 = net.forward(x, mode="mc", sample_keys=keys, pass_index=3)
    np.testing.assert_array_equal(p1, p2)
    p3 = net.forward(x, mode="mc", sample_keys=keys, pass_index=4)
    assert not np.array_equal(p1, p3)


def test_mask_independent_of_batch_composition():
    # The dropout masks are a pure function of the per-sample keys, so a
    # sample evaluated alone matches its in-batch result up to BLAS
    # accumulation order (different batch shapes pick different kernels).
    net = small_convnet()
    rng = np.random.default_rng(1)
    x = rng.random((4, 1, 12, 12))
    keys = derive_array(99, np.arange(4))
    full = net.forward(x, mode="mc", sample_keys=keys, pass_index=0)
    solo = net.forward(x[2:3], mode="mc", sample_keys=keys[2:3], pass_index=0)
    np.testing.assert_allclose(full[2:3], solo, atol=1e-12, rtol=0)


def test_shape_error_names_layer():
    net = build_convnet(seed=0)
    with pytest.raises(ShapeError, match="layer 0"):
        net.forward(np.zeros((1, 3, 28, 28)))


def test_forward_requires_keys_for_masked_modes():
    net = small_convnet()
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 1, 12, 12)), mode="mc")


def test_eval_scales_by_keep_probability():
    # one dropout layer, identity weights: eval halves the activations
    net = Network([Dense(4, 4), Dropout(0.5), Dense(4, 2), Softmax()],
                  seed=0, dtype=np.float64)
    net.layers[0].weight[...] = np.eye(4)
    net.layers[0].bias[...] = 0.0
    w2 = np.zeros((4, 2))
    w2[0, 0] = 1.0
    net.layers[2].weight[...] = w2
    net.layers[2].bias[...] = 0.0
    x = np.ones((1, 4))
    p = net.forward(x)
    # logit difference is 0.5 after scaling, not 1.0
    expected = np.exp(0.5) / (np.exp(0.5) + 1.0)
    assert p[0, 0] == pytest.approx(expected, abs=1e-12)


def test_gradient_check_small_network():
    net = small_convnet()
    assert net.num_params() < 2000
    rng = np.random.default_rng(3)
    x = rng.random((4, 1, 12, 12))
    y = rng.integers(0, 5, 4)
    keys = derive_array(123, np.arange(4))
    cfg = LossConfig(entropy_weight=0.5)

    logits, ctx = net.forward_logits_cached(x, keys, pass_index=0)
    _, dlogits = loss_and_dlogits(logits, y, cfg)
    grads = net.backward_from_dlogits(dlogits, ctx)

    def loss_now():
        lg, _ = net.forward_logits_cached(x, keys, pass_index=0)
        return loss_and_dlogits(lg, y, cfg)[0]

    h = 1e-6
    worst = 0.0
    for p, g in zip(net.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in rng.choice(flat.size, size=min(20, flat.size), replace=False):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_now()
            flat[i] = orig - h
            dn = loss_now()
            flat[i] = orig
            fd = (up - dn) / (2 * h)
            rel = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-8)
            worst = max(worst, rel)
    assert worst < 1e-4


def test_lr_zero_leaves_params_unchanged():
    net = small_convnet()
    before = [p.copy() for p in net.params()]
    x = np.random.default_rng(0).random((2, 1, 12, 12))
    backward_and_step(net, x, np.array([1, 2]), LossConfig(0.0), lr=0.0,
                      sample_keys=derive_array(5, np.arange(2)))
    for orig, now in zip(before, net.params()):
        np.testing.assert_array_equal(orig, now)


def test_single_step_descends():
    net = small_convnet(seed=11)
    rng = np.random.default_rng(4)
    x = rng.random((1, 1, 12, 12))
    y = np.array([2])
    keys = derive_array(6, np.arange(1))
    cfg = LossConfig(0.0)
    for lr in (1e-3, 1e-4):
        trial = net.clone()
        logits, _ = trial.forward_logits_cached(x, keys, 0)
        before, _ = loss_and_dlogits(logits, y, cfg)
        backward_and_step(trial, x, y, cfg, lr, keys)
        logits, _ = trial.forward_logits_cached(x, keys, 0)
        after, _ = loss_and_dlogits(logits, y, cfg)
        assert after < before


def test_divergence_detection():
    net = small_convnet()
    net.layers[0].weight[...] = np.inf
    x = np.random.default_rng(0).random((2, 1, 12, 12))
    with np.errstate(invalid="ignore"), pytest.raises(TrainingDiverged):
        backward_and_step(net, x, np.array([0, 1]), LossConfig(0.0), 1e-2,
                          derive_array(5, np.arange(2)))


def test_mlp_builder():
    net = build_mlp(seed=1, in_features=3, num_classes=2)
    p = net.forward(np.zeros((5, 3)))
    assert p.shape == (5, 2)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_f32_mode_runs_and_matches_architecture():
    net = build_convnet(seed=5, dtype=np.float32)
    x = np.random.default_rng(0).random((2, 1, 28, 28), dtype=np.float32)
    p = net.forward(x)
    assert p.dtype == np.float32
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
