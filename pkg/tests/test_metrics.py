"""TP/P arithmetic, tables, and seed aggregation."""

import numpy as np
import pytest

from selftrain.data import QuarantinedLabels
from selftrain.metrics import (RunSummary, aggregate_seeds, compute_tp_p,
                               emit_error_rate_table, emit_table,
                               read_summary_csv, write_summary_csv)


def truth_of(values):
    return QuarantinedLabels(np.asarray(values))


def test_tp_p_basic_arithmetic():
    truth = truth_of(np.zeros(50, dtype=int))
    accepted = [(i, 0) for i in range(8)] + [(8, 1), (9, 1)]
    tp, p, defined = compute_tp_p(accepted, truth, 50)
    assert (tp, p, defined) == (0.8, 0.2, True)


def test_tp_p_empty_is_flagged():
    tp, p, defined = compute_tp_p([], truth_of(np.zeros(10, int)), 10)
    assert (tp, p, defined) == (0.0, 0.0, False)


def test_tp_p_duplicates_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        compute_tp_p([(1, 0), (1, 0)], truth_of(np.zeros(10, int)), 10)


def test_tp_p_bounds_check():
    with pytest.raises(ValueError):
        compute_tp_p([(10, 0)], truth_of(np.zeros(10, int)), 10)


def test_tp_p_matches_naive_loop():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 10, 200)
    truth = truth_of(labels)
    idx = rng.choice(200, size=60, replace=False)
    accepted = [(int(i), int(rng.integers(0, 10))) for i in idx]
    tp, p, _ = compute_tp_p(accepted, truth, 200)
    hits = sum(1 for i, c in accepted if labels[i] == c)
    assert tp == pytest.approx(hits / 60)
    assert p == pytest.approx(60 / 200)


def row(size=300, basic=0.85, best=0.95, failed=False, tp=0.96, p=0.98,
        gate="ensemble_consensus", seeds=(0,), chash="x"):
    return RunSummary(size, basic, best, failed, tp, p, gate, seeds, chash)


def test_table_matches_reference_row_layout():
    text = emit_table([row()], "markdown")
    lines = text.splitlines()
    assert lines[0] == "| training size | basic acc | best acc | TP | P |"
    assert lines[2] == "| 300 | 0.8500 | 0.9500 | 0.9600 | 0.9800 |"


def test_fail_rendered_literally():
    text = emit_table([row(size=100, basic=0.7, failed=True, tp=0.47, p=0.92)],
                      "csv")
    assert "100,0.7000,fail,0.4700,0.9200" in text


def test_empty_table_is_header_only():
    md = emit_table([], "markdown").splitlines()
    assert len(md) == 2
    csv = emit_table([], "csv").splitlines()
    assert csv == ["training size,basic acc,best acc,TP,P"]


def test_csv_and_markdown_carry_identical_values():
    rows = [row(size=s, best=0.9 + s / 10000) for s in (100, 300, 1000)]
    csv = emit_table(rows, "csv").splitlines()[1:]
    md = emit_table(rows, "markdown").splitlines()[2:]
    for c_line, m_line in zip(csv, md):
        assert c_line.split(",") == [x.strip() for x in
                                     m_line.strip("|").split("|")]


def test_table_is_pure():
    rows = [row(), row(size=1000)]
    assert emit_table(rows, "markdown") == emit_table(rows, "markdown")


def test_mixed_gates_rejected():
    with pytest.raises(ValueError):
        emit_table([row(gate="expectation"), row(gate="credible_interval")])


def test_error_rate_table_includes_references():
    text = emit_error_rate_table([("self training with CI (this run)", 3.42)],
                                 "markdown")
    assert "improved GAN" in text and "not reproduced" in text
    assert "3.42" in text and "10.49" in text


def test_aggregate_single_is_identity():
    r = row()
    agg = aggregate_seeds([r])
    assert agg.median == r and agg.lo == r and agg.hi == r


def test_aggregate_fail_sorts_lowest():
    rows = [row(best=0.91, seeds=(1,)), row(best=0.93, seeds=(2,)),
            row(failed=True, best=0.99, seeds=(3,))]
    agg = aggregate_seeds(rows)
    assert agg.median.best_acc == 0.91
    assert agg.lo.failed
    assert agg.hi.best_acc == 0.93


def test_aggregate_median_matches_resort_oracle():
    rng = np.random.default_rng(1)
    rows = [row(best=float(b), seeds=(i,))
            for i, b in enumerate(rng.uniform(0.5, 1.0, 9))]
    agg = aggregate_seeds(rows)
    ordered = sorted(r.best_acc for r in rows)
    assert agg.median.best_acc == ordered[(len(rows) - 1) // 2]
    assert agg.lo.best_acc == ordered[0]
    assert agg.hi.best_acc == ordered[-1]


def test_aggregate_refuses_mixed_configs():
    with pytest.raises(ValueError):
        aggregate_seeds([row(chash="a"), row(chash="b")])


def test_summary_csv_round_trip(tmp_path):
    r = row(seeds=(3,), chash="deadbeef")
    path = tmp_path / "summary.csv"
    write_summary_csv(r, path)
    assert read_summary_csv(path) == r
