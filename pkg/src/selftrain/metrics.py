"""TP/P bookkeeping, run summaries, and table emission.

TP is the fraction of accepted pseudo-labels matching the hidden truth;
P is the fraction of the unlabeled pool accepted.  This module holds the
single sanctioned reader of QuarantinedLabels: truth feeds reporting
here and nowhere else.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import QuarantinedLabels

# Literature error rates for the comparison table.  Reference values
# only, not reproduced by this package.
REFERENCE_ERROR_RATES = (
    ("improved GAN (reference -- not reproduced)", 0.86),
    ("Ladder (reference -- not reproduced)", 1.06),
    ("AtlasRBF (reference -- not reproduced)", 8.10),
    ("pseudo-label (reference -- not reproduced)", 10.49),
)


class TpP(NamedTuple):
    tp_rate: float
    p_rate: float
    tp_defined: bool  # False when nothing was accepted (tp reported as 0)


def reporting_labels(truth: QuarantinedLabels) -> np.ndarray:
    """The one sanctioned reader of quarantined labels (reporting only)."""
    return truth._QuarantinedLabels__values


def compute_tp_p(accepted: list[tuple[int, int]], truth: QuarantinedLabels,
                 pool_size: int) -> TpP:
    """TP/P for one pseudo-label pass from (index, pseudo_class) pairs."""
    if not accepted:
        return TpP(0.0, 0.0, False)
    idx = np.array([i for i, _ in accepted])
    pseudo = np.array([c for _, c in accepted])
    if len(np.unique(idx)) != len(idx):
        raise ValueError("duplicate sample indices in accepted set")
    if idx.max() >= pool_size or idx.min() < 0:
        raise ValueError("accepted index outside the unlabeled pool")
    labels = reporting_labels(truth)
    tp = float(np.mean(labels[idx] == pseudo))
    return TpP(tp, len(accepted) / pool_size, True)


@dataclass(frozen=True)
class RunSummary:
    training_size: int
    basic_acc: float
    best_acc: float
    failed: bool  # best acc never beat basic acc by the fail margin
    tp: float
    p: float
    gate_kind: str
    seeds: tuple[int, ...]
    config_hash: str = ""


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _best_acc_cell(row: RunSummary) -> str:
    return "fail" if row.failed else _fmt(row.best_acc)


TABLE_COLUMNS = ("training size", "basic acc", "best acc", "TP", "P")


def emit_table(rows: list[RunSummary], fmt: str = "markdown") -> str:
    """Comparison table over training sizes for one gate kind."""
    kinds = {r.gate_kind for r in rows}
    if len(kinds) > 1:
        raise ValueError(f"one gate kind per table, got {sorted(kinds)}")
    cells = [[str(r.training_size), _fmt(r.basic_acc), _best_acc_cell(r),
              _fmt(r.tp), _fmt(r.p)] for r in rows]
    return _render(TABLE_COLUMNS, cells, fmt)


def emit_error_rate_table(rows: list[tuple[str, float]],
                          fmt: str = "markdown",
                          include_references: bool = True) -> str:
    """Error-rate comparison table with static literature baselines."""
    cells = []
    if include_references:
        cells += [[name, f"{rate:.2f}"] for name, rate in REFERENCE_ERROR_RATES]
    cells += [[name, f"{rate:.2f}"] for name, rate in rows]
    return _render(("Method", "error rate"), cells, fmt)


def _render(header: tuple[str, ...], cells: list[list[str]], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in cells:
            buf.write(",".join(row) + "\n")
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in cells]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


@dataclass(frozen=True)
class AggregateSummary:
    """Per-column order statistics over same-config seed repeats."""

    n_runs: int
    gate_kind: str
    median: RunSummary
    lo: RunSummary
    hi: RunSummary


SUMMARY_HEADER = ("training_size,basic_acc,best_acc,failed,tp,p,gate,"
                  "seeds,config_hash")


def write_summary_csv(summary: RunSummary, path) -> None:
    with open(path, "w") as f:
        f.write(SUMMARY_HEADER + "\n")
        f.write(",".join([
            str(summary.training_size), repr(summary.basic_acc),
            repr(summary.best_acc), str(int(summary.failed)),
            repr(summary.tp), repr(summary.p), summary.gate_kind,
            ";".join(str(s) for s in summary.seeds), summary.config_hash,
        ]) + "\n")


def read_summary_csv(path) -> RunSummary:
    lines = open(path).read().splitlines()
    if len(lines) < 2 or lines[0] != SUMMARY_HEADER:
        raise ValueError(f"unrecognized summary file {path}")
    (size, basic, best, failed, tp, p, gate, seeds, chash) = lines[1].split(",")
    return RunSummary(training_size=int(size), basic_acc=float(basic),
                      best_acc=float(best), failed=bool(int(failed)),
                      tp=float(tp), p=float(p), gate_kind=gate,
                      seeds=tuple(int(s) for s in seeds.split(";") if s),
                      config_hash=chash)


def _order_key(row: RunSummary) -> float:
    return -np.inf if row.failed else row.best_acc


def aggregate_seeds(summaries: list[RunSummary]) -> AggregateSummary:
    """Median/min/max RunSummary by best accuracy (fail sorts lowest).

    The median is the lower middle element, so it is always an actual
    run.  Mixing configurations is an error.
    """
    if not summaries:
        raise ValueError("nothing to aggregate")
    hashes = {s.config_hash for s in summaries}
    if len(hashes) > 1:
        raise ValueError("refusing to aggregate runs with different configs")
    ordered = sorted(summaries, key=_order_key)
    return AggregateSummary(n_runs=len(ordered),
                            gate_kind=ordered[0].gate_kind,
                            median=ordered[(len(ordered) - 1) // 2],
                            lo=ordered[0], hi=ordered[-1])
