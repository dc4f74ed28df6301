"""Regenerate the frozen test fixtures under tests/fixtures/.

Run once and commit the outputs; the tests then guard against behavioral
drift of checkpoint inference and MC-dropout statistics.
"""

from pathlib import Path

import numpy as np

from selftrain.checkpoint import save_network
from selftrain.data import write_idx_images, write_idx_labels
from selftrain.losses import LossConfig
from selftrain.network import build_convnet
from selftrain.training import train_epoch
from selftrain.mc import mc_predict

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240101)

    # digit-shaped inputs: blurred random strokes, values in [0, 1]
    images = np.clip(rng.random((64, 1, 28, 28)) ** 3 * 2.0, 0.0, 1.0)
    labels = rng.integers(0, 10, 64)
    net = build_convnet(seed=11, dtype=np.float64)
    for epoch in range(3):
        train_epoch(net, images, labels, LossConfig(0.0), lr=0.05,
                    batch_size=16, train_seed=5, domain=1, epoch_ordinal=epoch)
    save_network(net, FIXTURES / "checkpoint_smoke.npz")

    probe = images[7]
    np.save(FIXTURES / "probe_input.npy", probe)
    probs = net.forward(probe[None], mode="eval")[0]
    np.save(FIXTURES / "probe_probs.npy", probs)

    mc = mc_predict(net, probe, n_passes=80, seed=424242)
    np.save(FIXTURES / "probe_mc_mean.npy", mc.class_means())

    # tiny IDX pair for parser smoke tests against real container bytes
    (FIXTURES / "tiny-images-idx3-ubyte").write_bytes(
        write_idx_images(images[:4, 0]))
    (FIXTURES / "tiny-labels-idx1-ubyte").write_bytes(
        write_idx_labels(labels[:4]))
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
