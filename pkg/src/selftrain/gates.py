"""The five confidence gates deciding which pseudo-labels to train on.

Every gate is a pure function of its prediction inputs and returns a
GateDecision; thresholds are compared against a gate-specific statistic
(max softmax, MC mean, or the credible-interval lower bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mc import MCPredictions
from .studentt import t_quantile

GATE_KINDS = ("softmax_threshold", "ensemble_consensus", "dropout_consensus",
              "expectation", "credible_interval")


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    pseudo_class: int | None
    stat: float


@dataclass(frozen=True)
class GateConfig:
    kind: str
    threshold: float
    mc_passes: int = 80
    alpha: float = 0.05
    per_voter_floor: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.kind == "credible_interval" and self.mc_passes < 2:
            raise ValueError("credible_interval needs at least 2 MC passes")
        if self.mc_passes < 1:
            raise ValueError("mc_passes must be >= 1")

    @property
    def uses_mc(self) -> bool:
        return self.kind in ("dropout_consensus", "expectation",
                             "credible_interval")


_REJECT = GateDecision(False, None, 0.0)


def gate_softmax(p_det: np.ndarray, threshold: float) -> GateDecision:
    """Accept the argmax class iff the top softmax probability clears the
    threshold."""
    p_det = np.asarray(p_det)
    cls = int(p_det.argmax())
    stat = float(p_det[cls])
    return GateDecision(stat >= threshold, cls if stat >= threshold else None, stat)


def gate_ensemble(p_a: np.ndarray, p_b: np.ndarray,
                  floor: float | None = None) -> GateDecision:
    """Accept iff two networks agree on the class (and, with a floor, both
    predict it with at least that probability)."""
    p_a, p_b = np.asarray(p_a), np.asarray(p_b)
    if p_a.shape != p_b.shape:
        raise ValueError("ensemble members must share the class count")
    ca, cb = int(p_a.argmax()), int(p_b.argmax())
    stat = float(min(p_a[ca], p_b[cb]))
    if ca != cb:
        return _REJECT
    if floor is not None and stat < floor:
        return GateDecision(False, None, stat)
    return GateDecision(True, ca, stat)


def gate_dropout_consensus(mc: MCPredictions, p_det: np.ndarray,
                           floor: float = 0.95) -> GateDecision:
    """Accept iff all MC passes vote the same class (consensus, not
    majority) and the deterministic pass backs it above the floor."""
    votes = mc.row_argmaxes()
    cls = int(votes[0])
    if np.any(votes != cls):
        return _REJECT
    stat = float(np.asarray(p_det)[cls])
    return GateDecision(stat >= floor, cls if stat >= floor else None, stat)


def gate_expectation(mc: MCPredictions, threshold: float) -> GateDecision:
    """Accept iff the empirical mean probability of the top class (over MC
    passes) clears the threshold."""
    means = mc.class_means()
    cls = int(means.argmax())
    stat = float(means[cls])
    return GateDecision(stat >= threshold, cls if stat >= threshold else None, stat)


def ci_lower_bound(values: np.ndarray, alpha: float) -> float:
    """Lower end of the two-sided (1-alpha) t-interval for the mean."""
    values = np.asarray(values, dtype=np.float64)
    k = values.shape[0]
    if k < 2:
        raise ValueError("interval needs at least 2 samples")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    t = t_quantile(1.0 - alpha / 2.0, k - 1)
    return mean - t * sd / math.sqrt(k)


def gate_credible_interval(mc: MCPredictions, threshold: float,
                           alpha: float = 0.05) -> GateDecision:
    """Accept iff the credible-interval lower bound of the top class's mean
    probability strictly exceeds the threshold.

    The interval is the t-interval over the K MC samples of the predicted
    class (sample standard deviation, divisor K-1).  Strict inequality on
    purpose: the bound must be higher than the threshold.
    """
    if mc.n_passes < 2:
        raise ValueError("credible_interval gate needs K >= 2 MC passes")
    means = mc.class_means()
    cls = int(means.argmax())
    lower = ci_lower_bound(np.asarray(mc.samples)[:, cls], alpha)
    return GateDecision(lower > threshold, cls if lower > threshold else None,
                        float(lower))
