"""End-to-end pipeline smoke test on a procedurally generated stand-in
dataset written to real IDX containers.  This validates the MNIST code
path (file loading, 28x28 convnet, f32 mode, pooled MC gating) without
asserting any accuracy targets from the real-data criteria."""

import numpy as np
import pytest

from selftrain.cli import main
from selftrain.data import MNIST_FILES, load_mnist, make_split, \
    write_idx_images, write_idx_labels
from selftrain.gates import GateConfig
from selftrain.protocol import ProtocolConfig, Seeds, run_protocol
from selftrain.schedules import LinearSchedule


def blob_dataset(n: int, rng: np.random.Generator):
    """Ten classes of bright 6x6 blobs at class-dependent positions."""
    anchors = [(r, c) for r in (3, 12, 20) for c in (3, 12, 20)][:9]
    anchors.append((20, 11))
    labels = rng.integers(0, 10, n)
    images = rng.uniform(0.0, 0.25, size=(n, 28, 28))
    for i, lab in enumerate(labels):
        r, c = anchors[lab]
        images[i, r:r + 6, c:c + 6] += 0.7
    return np.clip(images, 0.0, 1.0), labels


@pytest.fixture(scope="module")
def fake_mnist_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fake_mnist")
    rng = np.random.default_rng(99)
    train_x, train_y = blob_dataset(800, rng)
    test_x, test_y = blob_dataset(300, rng)
    (root / MNIST_FILES["train_images"]).write_bytes(write_idx_images(train_x))
    (root / MNIST_FILES["train_labels"]).write_bytes(write_idx_labels(train_y))
    (root / MNIST_FILES["test_images"]).write_bytes(write_idx_images(test_x))
    (root / MNIST_FILES["test_labels"]).write_bytes(write_idx_labels(test_y))
    return root


def test_load_mnist_shapes(fake_mnist_dir):
    train, test = load_mnist(fake_mnist_dir, train_pool=500, dtype=np.float32)
    assert train.images.shape == (500, 1, 28, 28)
    assert train.images.dtype == np.float32
    assert test.images.shape == (300, 1, 28, 28)
    assert train.labels.max() <= 9


def test_desk_style_protocol_runs_f32(fake_mnist_dir):
    train, test = load_mnist(fake_mnist_dir, train_pool=800, dtype=np.float32)
    sep = 3
    pcfg = ProtocolConfig(
        gate=GateConfig("credible_interval", 0.98, mc_passes=8),
        theta_schedule=LinearSchedule(0.98, 0.90, sep),
        lambda_schedule=LinearSchedule(1.0, 0.0, sep),
        seeds=Seeds(1, 2, 3), pretrain_epochs=6, selftrain_epochs=sep,
        lr=0.05, batch_size=32)
    split = make_split(train, 100, 300, pcfg.seeds.split, test=test)
    result = run_protocol(split, pcfg, np.float32)
    assert len(result.selftrain_reports) == sep
    assert result.net.dtype == np.float32
    # blobs are easy: pretraining alone should beat the class prior
    assert result.basic_acc > 0.3
    for r in result.selftrain_reports:
        assert 0.0 <= r.p_rate <= 1.0
        assert round(r.p_rate * 300) == r.accepted_count


def test_cli_run_on_idx_files(fake_mnist_dir, tmp_path):
    out = tmp_path / "runs"
    rc = main(["run", "--dataset", "mnist", "--data-dir", str(fake_mnist_dir),
               "--out", str(out), "--labeled-size", "100",
               "--unlabeled-size", "200", "--pretrain-epochs", "3",
               "--selftrain-epochs", "2", "--mc-samples", "6",
               "--precision", "f32", "--seed", "0", "--lr", "0.05"])
    assert rc == 0
    run_dir = out / "mnist_credible_interval_L100_s0"
    assert (run_dir / "summary.csv").exists()
    assert (run_dir / "epoch_curves.png").exists()
    # train_pool default exceeds the stand-in file; loader takes what exists
    assert (run_dir / "manifest.txt").exists()
