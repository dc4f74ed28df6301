"""Render per-run training curves to image files next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .protocol import EpochReport  # noqa: E402


def save_epoch_curves(reports: list[EpochReport], path: str | Path,
                      title: str = "") -> Path:
    """Three stacked panels: test accuracy, TP/P rates, schedules in force.

    Pretraining and self-training epochs share one axis; the phase
    boundary is marked so the recovery dip after it stays visible.
    """
    path = Path(path)
    pre = [r for r in reports if r.phase == "pretrain"]
    post = [r for r in reports if r.phase == "selftrain"]
    xs = list(range(len(pre) + len(post)))
    boundary = len(pre)
    acc = [r.test_accuracy for r in pre + post]

    fig, (ax_acc, ax_rates, ax_sched) = plt.subplots(
        3, 1, figsize=(8, 9), sharex=True)
    ax_acc.plot(xs, acc, lw=1.5, color="tab:blue")
    if pre:
        ax_acc.axhline(pre[-1].test_accuracy, color="gray", ls=":",
                       label=f"basic acc = {pre[-1].test_accuracy:.4f}")
    if post:
        ax_acc.axvline(boundary - 0.5, color="black", ls="--", lw=0.8)
    ax_acc.set_ylabel("test accuracy")
    ax_acc.legend(loc="lower right", fontsize=8)

    if post:
        px = xs[boundary:]
        ax_rates.plot(px, [r.tp_rate for r in post], label="TP", color="tab:green")
        ax_rates.plot(px, [r.p_rate for r in post], label="P", color="tab:orange")
        ax_sched.plot(px, [r.theta for r in post], label="threshold",
                      color="tab:red")
        ax_sched.plot(px, [r.entropy_weight for r in post],
                      label="entropy weight", color="tab:purple")
    ax_rates.set_ylabel("rate")
    ax_rates.set_ylim(-0.05, 1.05)
    ax_sched.set_ylabel("scheduled value")
    ax_sched.set_xlabel("epoch (pretrain + selftrain)")
    if post:
        ax_rates.legend(loc="lower right", fontsize=8)
        ax_sched.legend(loc="upper right", fontsize=8)
    if title:
        ax_acc.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def save_accepted_curve(reports: list[EpochReport], path: str | Path,
                        title: str = "") -> Path:
    """Accepted pseudo-label counts per self-training epoch."""
    path = Path(path)
    post = [r for r in reports if r.phase == "selftrain"]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot([r.epoch for r in post], [r.accepted_count for r in post],
            color="tab:blue", lw=1.5)
    ax.set_xlabel("selftrain epoch")
    ax.set_ylabel("accepted samples")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path
