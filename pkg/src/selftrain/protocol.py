"""The two-phase training protocol: supervised pretraining, then
alternating pseudo-labeled and labeled epochs under a confidence gate.

Each self-training epoch re-decides the accepted set from scratch (no
accumulation), trains one epoch on the accepted pseudo-labels, then one
epoch on the original labeled set, and records an EpochReport.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Split
from .gates import (GateConfig, gate_credible_interval, gate_dropout_consensus,
                    gate_ensemble, gate_expectation, gate_softmax)
from .losses import LossConfig
from .mc import MCPredictions, mc_predict_pool
from .metrics import TpP, compute_tp_p
from .network import Network, build_convnet, build_mlp
from .rng import derive, derive_array
from .schedules import LinearSchedule
from .training import DOMAIN_LABELED, DOMAIN_PSEUDO, train_epoch

# A run "fails" when self-training never lifts best acc above basic acc
# by at least this margin.
FAIL_MARGIN = 0.005


@dataclass(frozen=True)
class Seeds:
    network: int
    split: int
    mc: int


@dataclass(frozen=True)
class EnsembleConfig:
    """Second network for the two-network agreement gate."""

    lr: float = 1e-2
    entropy_weight: float = 0.1


@dataclass(frozen=True)
class ProtocolConfig:
    gate: GateConfig
    theta_schedule: LinearSchedule
    lambda_schedule: LinearSchedule
    seeds: Seeds
    pretrain_epochs: int = 40
    selftrain_epochs: int = 100
    lr: float = 1e-2
    batch_size: int = 32
    ensemble_second: EnsembleConfig | None = None
    max_accept_fraction: float | None = None
    mc_chunk_size: int = 512

    def __post_init__(self):
        if self.pretrain_epochs < 1:
            raise ValueError("pretrain_epochs must be >= 1")
        for name, sched in (("theta_schedule", self.theta_schedule),
                            ("lambda_schedule", self.lambda_schedule)):
            if self.selftrain_epochs and sched.total_epochs != self.selftrain_epochs:
                raise ValueError(
                    f"{name} covers {sched.total_epochs} epochs, expected "
                    f"{self.selftrain_epochs}")
        if self.gate.kind == "ensemble_consensus" and self.ensemble_second is None:
            raise ValueError("ensemble_consensus gate needs ensemble_second")


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    phase: str  # "pretrain" or "selftrain"
    test_accuracy: float
    tp_rate: float
    tp_defined: bool
    p_rate: float
    accepted_count: int
    theta: float | None  # scheduled threshold in force (None in pretraining)
    entropy_weight: float


def evaluate(net: Network, images: np.ndarray, labels: np.ndarray,
             batch_size: int = 512) -> float:
    """Deterministic-pass test accuracy (argmax of the softmax output)."""
    hits = 0
    for lo in range(0, len(labels), batch_size):
        probs = net.forward(images[lo:lo + batch_size], mode="eval")
        hits += int((probs.argmax(axis=1) == labels[lo:lo + batch_size]).sum())
    return hits / len(labels)


def _det_probs(net: Network, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
    parts = [net.forward(images[lo:lo + batch_size], mode="eval")
             for lo in range(0, len(images), batch_size)]
    return np.concatenate(parts, axis=0)


DecisionCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def pseudo_label_pass(net: Network, split: Split, gate: GateConfig,
                      threshold: float, pass_seed: int,
                      second_net: Network | None = None,
                      mc_chunk_size: int = 512,
                      max_accept_fraction: float | None = None,
                      decision_cb: DecisionCallback | None = None,
                      ) -> tuple[list[tuple[int, int]], TpP]:
    """Evaluate every unlabeled sample through the gate at `threshold`.

    Returns the accepted (pool index, pseudo class) pairs plus TP/P
    computed against the quarantined truth (reporting only).  Acceptance
    is a pure function of (network state, threshold, pass_seed).
    """
    images = split.unlabeled.images
    n = len(images)
    decisions: list = [None] * n
    if gate.kind == "softmax_threshold":
        p_det = _det_probs(net, images)
        decisions = [gate_softmax(p_det[i], threshold) for i in range(n)]
    elif gate.kind == "ensemble_consensus":
        if second_net is None:
            raise ValueError("ensemble gate requires the second network")
        p_a = _det_probs(net, images)
        p_b = _det_probs(second_net, images)
        decisions = [gate_ensemble(p_a[i], p_b[i], gate.per_voter_floor)
                     for i in range(n)]
    else:
        keys = derive_array(pass_seed, np.arange(n))
        probs = mc_predict_pool(net, images, gate.mc_passes, keys,
                                chunk_size=mc_chunk_size)
        if gate.kind == "dropout_consensus":
            floor = (gate.per_voter_floor if gate.per_voter_floor is not None
                     else threshold)
            p_det = _det_probs(net, images)
            decisions = [gate_dropout_consensus(MCPredictions(probs[i]),
                                                p_det[i], floor)
                         for i in range(n)]
        elif gate.kind == "expectation":
            decisions = [gate_expectation(MCPredictions(probs[i]), threshold)
                         for i in range(n)]
        elif gate.kind == "credible_interval":
            decisions = [gate_credible_interval(MCPredictions(probs[i]),
                                                threshold, gate.alpha)
                         for i in range(n)]
    accepted = [(i, d.pseudo_class) for i, d in enumerate(decisions) if d.accepted]
    if max_accept_fraction is not None and accepted:
        cap = int(max_accept_fraction * n)
        if len(accepted) > cap:
            ranked = sorted(accepted, key=lambda ic: (-decisions[ic[0]].stat, ic[0]))
            accepted = sorted(ranked[:cap])
    if decision_cb is not None:
        decision_cb(0,
                    np.array([d.accepted for d in decisions]),
                    np.array([d.stat for d in decisions]),
                    np.array([-1 if d.pseudo_class is None else d.pseudo_class
                              for d in decisions]))
    return accepted, compute_tp_p(accepted, split.unlabeled_truth, n)


def pretrain(net: Network, split: Split, cfg: ProtocolConfig,
             second_net: Network | None = None) -> list[EpochReport]:
    """Supervised pass over the labeled set for cfg.pretrain_epochs.

    The entropy weight is held at the schedule's start value; the final
    epoch's test accuracy is the run's basic accuracy.
    """
    if len(split.labeled) == 0:
        raise ValueError("labeled set is empty")
    w = cfg.lambda_schedule.start
    reports = []
    for e in range(cfg.pretrain_epochs):
        train_epoch(net, split.labeled.images, split.labeled.labels,
                    LossConfig(w), cfg.lr, cfg.batch_size,
                    train_seed=net.seed, domain=DOMAIN_LABELED, epoch_ordinal=e)
        if second_net is not None:
            train_epoch(second_net, split.labeled.images, split.labeled.labels,
                        LossConfig(cfg.ensemble_second.entropy_weight),
                        cfg.ensemble_second.lr, cfg.batch_size,
                        train_seed=second_net.seed, domain=DOMAIN_LABELED,
                        epoch_ordinal=e)
        acc = evaluate(net, split.test.images, split.test.labels)
        reports.append(EpochReport(epoch=e, phase="pretrain", test_accuracy=acc,
                                   tp_rate=0.0, tp_defined=False, p_rate=0.0,
                                   accepted_count=0, theta=None,
                                   entropy_weight=w))
    return reports


@dataclass
class SelfTrainResult:
    reports: list[EpochReport]
    best_acc: float
    best_epoch: int
    best_net: Network
    final_tp: TpP


def self_train(net: Network, split: Split, cfg: ProtocolConfig,
               second_net: Network | None = None,
               decision_cb: DecisionCallback | None = None) -> SelfTrainResult:
    """Alternating pseudo/labeled epochs under the gate with scheduled
    threshold and entropy weight.  Best acc is the max test accuracy."""
    unl = split.unlabeled.images
    reports = []
    best_acc, best_epoch, best_net = -1.0, -1, net.clone()
    final_tp = TpP(0.0, 0.0, False)
    for e in range(cfg.selftrain_epochs):
        theta = cfg.theta_schedule.value(e)
        w = cfg.lambda_schedule.value(e)
        pass_seed = derive(cfg.seeds.mc, e)
        accepted, tpp = pseudo_label_pass(
            net, split, cfg.gate, theta, pass_seed, second_net=second_net,
            mc_chunk_size=cfg.mc_chunk_size,
            max_accept_fraction=cfg.max_accept_fraction,
            decision_cb=(lambda _, *a: decision_cb(e, *a)) if decision_cb else None)
        final_tp = tpp
        if accepted:
            idx = np.array([i for i, _ in accepted])
            pseudo = np.array([c for _, c in accepted])
            train_epoch(net, unl[idx], pseudo, LossConfig(w), cfg.lr,
                        cfg.batch_size, train_seed=net.seed,
                        domain=DOMAIN_PSEUDO, epoch_ordinal=e,
                        sample_indices=idx)
            if second_net is not None:
                train_epoch(second_net, unl[idx], pseudo,
                            LossConfig(cfg.ensemble_second.entropy_weight),
                            cfg.ensemble_second.lr, cfg.batch_size,
                            train_seed=second_net.seed, domain=DOMAIN_PSEUDO,
                            epoch_ordinal=e, sample_indices=idx)
        train_epoch(net, split.labeled.images, split.labeled.labels,
                    LossConfig(w), cfg.lr, cfg.batch_size, train_seed=net.seed,
                    domain=DOMAIN_LABELED,
                    epoch_ordinal=cfg.pretrain_epochs + e)
        if second_net is not None:
            train_epoch(second_net, split.labeled.images, split.labeled.labels,
                        LossConfig(cfg.ensemble_second.entropy_weight),
                        cfg.ensemble_second.lr, cfg.batch_size,
                        train_seed=second_net.seed, domain=DOMAIN_LABELED,
                        epoch_ordinal=cfg.pretrain_epochs + e)
        acc = evaluate(net, split.test.images, split.test.labels)
        if acc > best_acc:
            best_acc, best_epoch, best_net = acc, e, net.clone()
        reports.append(EpochReport(epoch=e, phase="selftrain",
                                   test_accuracy=acc, tp_rate=tpp.tp_rate,
                                   tp_defined=tpp.tp_defined,
                                   p_rate=tpp.p_rate,
                                   accepted_count=len(accepted), theta=theta,
                                   entropy_weight=w))
    return SelfTrainResult(reports, best_acc, best_epoch, best_net, final_tp)


@dataclass
class RunResult:
    basic_acc: float
    best_acc: float
    failed: bool
    pretrain_reports: list[EpochReport]
    selftrain_reports: list[EpochReport]
    final_tp: TpP
    net: Network
    best_net: Network
    second_net: Network | None = None


def default_net_for(split: Split, seed: int, dtype=np.float64,
                    num_classes: int | None = None) -> Network:
    """Convnet for image batches (N,1,H,W), small MLP for feature vectors."""
    images = split.labeled.images
    if num_classes is None:
        num_classes = int(split.labeled.labels.max()) + 1
    if images.ndim == 4:
        return build_convnet(seed, num_classes=num_classes,
                             in_channels=images.shape[1],
                             input_hw=images.shape[2:], dtype=dtype)
    return build_mlp(seed, in_features=images.shape[1],
                     num_classes=num_classes, dtype=dtype)


def run_from_pretrained(net: Network, pre_reports: list[EpochReport],
                        split: Split, cfg: ProtocolConfig,
                        second_net: Network | None = None,
                        decision_cb: DecisionCallback | None = None) -> RunResult:
    """Self-train a pretrained network (clone it first if you reuse it)."""
    basic_acc = pre_reports[-1].test_accuracy
    if cfg.selftrain_epochs == 0:
        return RunResult(basic_acc, basic_acc, False, pre_reports, [],
                         TpP(0.0, 0.0, False), net, net.clone(), second_net)
    result = self_train(net, split, cfg, second_net=second_net,
                        decision_cb=decision_cb)
    failed = result.best_acc <= basic_acc + FAIL_MARGIN
    return RunResult(basic_acc, result.best_acc, failed, pre_reports,
                     result.reports, result.final_tp, net, result.best_net,
                     second_net)


def run_protocol(split: Split, cfg: ProtocolConfig, dtype=np.float64,
                 net: Network | None = None,
                 decision_cb: DecisionCallback | None = None) -> RunResult:
    """Pretrain then self-train; builds default networks when none given."""
    if net is None:
        net = default_net_for(split, cfg.seeds.network, dtype)
    second = None
    if cfg.gate.kind == "ensemble_consensus":
        second = default_net_for(split, derive(cfg.seeds.network, 1), dtype)
    pre_reports = pretrain(net, split, cfg, second_net=second)
    return run_from_pretrained(net, pre_reports, split, cfg, second_net=second,
                               decision_cb=decision_cb)


# -- epoch-report log IO ------------------------------------------------

EPOCH_LOG_HEADER = ("epoch,phase,test_accuracy,tp_rate,tp_defined,p_rate,"
                    "accepted_count,theta,lambda")


def _log_float(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_epoch_log(reports: list[EpochReport], path: str | Path) -> None:
    """One CSV record per epoch; floats use repr so reruns can be compared
    byte-for-byte."""
    with open(path, "w") as f:
        f.write(EPOCH_LOG_HEADER + "\n")
        for r in reports:
            f.write(",".join([str(r.epoch), r.phase,
                              _log_float(r.test_accuracy),
                              _log_float(r.tp_rate),
                              str(int(r.tp_defined)),
                              _log_float(r.p_rate),
                              str(r.accepted_count),
                              _log_float(r.theta),
                              _log_float(r.entropy_weight)]) + "\n")


def read_epoch_log(path: str | Path) -> list[EpochReport]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != EPOCH_LOG_HEADER:
        raise ValueError(f"unrecognized epoch log header in {path}")
    reports = []
    for line in lines[1:]:
        (epoch, phase, acc, tp, tpdef, p, count, theta, lam) = line.split(",")
        reports.append(EpochReport(
            epoch=int(epoch), phase=phase, test_accuracy=float(acc),
            tp_rate=float(tp), tp_defined=bool(int(tpdef)), p_rate=float(p),
            accepted_count=int(count),
            theta=None if theta == "" else float(theta),
            entropy_weight=float(lam)))
    return reports
