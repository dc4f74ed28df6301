"""Figure rendering writes valid image files."""

from selftrain.figures import save_accepted_curve, save_epoch_curves
from selftrain.protocol import EpochReport


def fake_reports():
    pre = [EpochReport(e, "pretrain", 0.5 + e / 100, 0.0, False, 0.0, 0,
                       None, 1.0) for e in range(5)]
    post = [EpochReport(e, "selftrain", 0.6 + e / 50, 0.9, True, 0.2 + e / 40,
                        40 + e, 0.98 - e / 100, 1.0 - e / 10)
            for e in range(8)]
    return pre + post


def test_epoch_curves_png(tmp_path):
    out = save_epoch_curves(fake_reports(), tmp_path / "curves.png",
                            title="toy")
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_accepted_curve_png(tmp_path):
    out = save_accepted_curve(fake_reports(), tmp_path / "accepted.png")
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_pretrain_only_reports_render(tmp_path):
    pre = [r for r in fake_reports() if r.phase == "pretrain"]
    out = save_epoch_curves(pre, tmp_path / "pre.png")
    assert out.exists()
