"""Command-line interface: fetch-data, pretrain, selftrain, run, report.

Exit codes: 0 on success, 1 when training aborts (or data cannot be
fetched), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

MNIST_GZ_MD5 = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}
DEFAULT_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"
DATA_DIR_ENV = "SELFTRAIN_DATA_DIR"


def _apply_thread_hint(argv: list[str]) -> None:
    """Honor --threads before numpy loads its BLAS (hint only)."""
    for i, arg in enumerate(argv):
        value = None
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
        if value and value.isdigit():
            for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                os.environ.setdefault(var, value)
            return


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--dataset", choices=["mnist", "synth"])
    p.add_argument("--data-dir", dest="data_dir",
                   help=f"MNIST IDX directory (or ${DATA_DIR_ENV})")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--labeled-size", dest="labeled_size", type=int)
    p.add_argument("--unlabeled-size", dest="unlabeled_size",
                   help="size of the unlabeled pool, or 'all'")
    p.add_argument("--gate", help="confidence gate kind")
    p.add_argument("--gates", help="comma-separated gate sweep")
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--theta-start", dest="theta_start", type=float)
    p.add_argument("--theta-end", dest="theta_end", type=float)
    p.add_argument("--lambda-start", dest="lambda_start", type=float)
    p.add_argument("--lambda-end", dest="lambda_end", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--per-voter-floor", dest="per_voter_floor")
    p.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    p.add_argument("--selftrain-epochs", dest="selftrain_epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", dest="seeds", help="seed or comma-separated list")
    p.add_argument("--precision", choices=["f32", "f64"])
    p.add_argument("--threads", type=int, help="BLAS thread-count hint")
    p.add_argument("--max-accept-fraction", dest="max_accept_fraction")
    p.add_argument("--log-decisions", dest="log_decisions",
                   action="store_const", const=True)


def _config_from_args(args: argparse.Namespace):
    from .config import build_config, read_config_file

    file_values = read_config_file(args.config) if args.config else {}
    keys = ("dataset", "data_dir", "out_dir", "labeled_size", "unlabeled_size",
            "gate", "gates", "mc_samples", "theta_start", "theta_end",
            "lambda_start", "lambda_end", "alpha", "per_voter_floor",
            "pretrain_epochs", "selftrain_epochs", "lr", "batch_size",
            "seeds", "precision", "threads", "max_accept_fraction",
            "log_decisions")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None)
                 is not None}
    if "data_dir" not in overrides and "data_dir" not in file_values:
        env = os.environ.get(DATA_DIR_ENV)
        if env:
            overrides["data_dir"] = env
    return build_config(file_values, overrides)


def _load_split(cfg):
    import numpy as np

    from .data import load_mnist, make_split, synth_two_gaussians

    dtype = np.float32 if cfg.precision == "f32" else np.float64
    if cfg.dataset == "mnist":
        train, test = load_mnist(cfg.data_dir, train_pool=cfg.train_pool,
                                 dtype=dtype)

        def for_seed(split_seed):
            return make_split(train, cfg.labeled_size, cfg.unlabeled_size,
                              split_seed, test=test)
    else:
        means = np.zeros((2, cfg.synth_dim))
        means[1, 0] = cfg.synth_gap

        def for_seed(split_seed):
            unl = cfg.unlabeled_size if cfg.unlabeled_size is not None else 2000
            split, _ = synth_two_gaussians(cfg.labeled_size, unl,
                                           cfg.synth_test, means,
                                           cfg.synth_sigma, split_seed,
                                           dtype=dtype)
            return split
    return for_seed, dtype


def _run_dir(cfg, gate_kind: str, seed: int) -> Path:
    return (Path(cfg.out_dir)
            / f"{cfg.dataset}_{gate_kind}_L{cfg.labeled_size}_s{seed}")


def _decision_logger(path: Path):
    f = open(path, "w")
    f.write("epoch,index,stat,accepted,pseudo_class\n")

    def log(epoch, accepted, stats, classes):
        for i in range(len(stats)):
            f.write(f"{epoch},{i},{stats[i]!r},{int(accepted[i])},"
                    f"{classes[i]}\n")
        f.flush()

    return log


def _write_run_artifacts(run_dir: Path, cfg, gate_kind, seed, result):
    from .checkpoint import save_network
    from .config import config_hash, echo_config
    from .data import save_manifest
    from .figures import save_accepted_curve, save_epoch_curves
    from .metrics import RunSummary, write_summary_csv
    from .protocol import write_epoch_log

    all_reports = result.pretrain_reports + result.selftrain_reports
    write_epoch_log(result.pretrain_reports, run_dir / "pretrain_log.csv")
    write_epoch_log(all_reports, run_dir / "epoch_log.csv")
    if result.selftrain_reports:
        write_epoch_log(result.selftrain_reports, run_dir / "selftrain_log.csv")
    save_network(result.net, run_dir / "final.npz")
    save_network(result.best_net, run_dir / "best.npz")
    summary = RunSummary(training_size=cfg.labeled_size,
                         basic_acc=result.basic_acc, best_acc=result.best_acc,
                         failed=result.failed, tp=result.final_tp.tp_rate,
                         p=result.final_tp.p_rate, gate_kind=gate_kind,
                         seeds=(seed,),
                         config_hash=config_hash(cfg, gate_kind))
    write_summary_csv(summary, run_dir / "summary.csv")
    echo_config(cfg, run_dir / "config.resolved")
    save_epoch_curves(all_reports, run_dir / "epoch_curves.png",
                      title=f"{gate_kind}, {cfg.labeled_size} labels, seed {seed}")
    save_accepted_curve(all_reports, run_dir / "accepted_count.png")
    return summary


def cmd_run(args) -> int:
    from .checkpoint import save_network
    from .config import echo_config, protocol_for
    from .data import save_manifest
    from .metrics import aggregate_seeds, emit_table
    from .protocol import (default_net_for, pretrain, run_from_pretrained,
                           run_protocol)

    cfg = _config_from_args(args)
    for_seed, dtype = _load_split(cfg)
    summaries_by_gate = {kind: [] for kind in cfg.run_gates()}
    for seed in cfg.seeds:
        base_pcfg = protocol_for(cfg, cfg.run_gates()[0], seed)
        split = for_seed(base_pcfg.seeds.split)
        shared_net = None
        shared_reports = None
        for gate_kind in cfg.run_gates():
            pcfg = protocol_for(cfg, gate_kind, seed)
            run_dir = _run_dir(cfg, gate_kind, seed)
            run_dir.mkdir(parents=True, exist_ok=True)
            save_manifest(split, run_dir / "manifest.txt")
            decision_cb = (_decision_logger(run_dir / "decisions.csv")
                           if cfg.log_decisions else None)
            if gate_kind == "ensemble_consensus":
                result = run_protocol(split, pcfg, dtype,
                                      decision_cb=decision_cb)
            else:
                if shared_net is None:
                    shared_net = default_net_for(split, pcfg.seeds.network,
                                                 dtype)
                    shared_reports = pretrain(shared_net, split, pcfg)
                    save_network(shared_net, run_dir / "pretrain.npz")
                result = run_from_pretrained(shared_net.clone(),
                                             shared_reports, split, pcfg,
                                             decision_cb=decision_cb)
            summary = _write_run_artifacts(run_dir, cfg, gate_kind, seed,
                                           result)
            summaries_by_gate[gate_kind].append(summary)
            fail_note = " (fail)" if summary.failed else ""
            print(f"[{gate_kind} seed {seed}] basic acc {summary.basic_acc:.4f}"
                  f" best acc {summary.best_acc:.4f}{fail_note}"
                  f" TP {summary.tp:.4f} P {summary.p:.4f}")
    out = Path(cfg.out_dir)
    for gate_kind, summaries in summaries_by_gate.items():
        if len(summaries) > 1:
            agg = aggregate_seeds(summaries)
            (out / f"aggregate_{gate_kind}.md").write_text(
                emit_table([agg.lo, agg.median, agg.hi], "markdown"))
            print(f"[{gate_kind}] median best acc over {agg.n_runs} seeds: "
                  f"{'fail' if agg.median.failed else f'{agg.median.best_acc:.4f}'}")
    return 0


def cmd_pretrain(args) -> int:
    from .checkpoint import save_network
    from .config import echo_config, protocol_for
    from .data import save_manifest
    from .protocol import default_net_for, pretrain, write_epoch_log

    cfg = _config_from_args(args)
    for_seed, dtype = _load_split(cfg)
    for seed in cfg.seeds:
        pcfg = protocol_for(cfg, cfg.run_gates()[0], seed)
        split = for_seed(pcfg.seeds.split)
        net = default_net_for(split, pcfg.seeds.network, dtype)
        reports = pretrain(net, split, pcfg)
        run_dir = _run_dir(cfg, "pretrain", seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        save_manifest(split, run_dir / "manifest.txt")
        save_network(net, run_dir / "pretrain.npz")
        write_epoch_log(reports, run_dir / "pretrain_log.csv")
        echo_config(cfg, run_dir / "config.resolved")
        print(f"[pretrain seed {seed}] basic acc "
              f"{reports[-1].test_accuracy:.4f} -> {run_dir/'pretrain.npz'}")
    return 0


def cmd_selftrain(args) -> int:
    from .checkpoint import load_network
    from .config import protocol_for
    from .protocol import read_epoch_log, run_from_pretrained

    cfg = _config_from_args(args)
    for_seed, dtype = _load_split(cfg)
    seed = cfg.seeds[0]
    pcfg = protocol_for(cfg, cfg.run_gates()[0], seed)
    split = for_seed(pcfg.seeds.split)
    net = load_network(args.checkpoint)
    pre_log = Path(args.checkpoint).parent / "pretrain_log.csv"
    if not pre_log.exists():
        print(f"error: {pre_log} not found next to the checkpoint",
              file=sys.stderr)
        return 2
    pre_reports = read_epoch_log(pre_log)
    gate_kind = cfg.run_gates()[0]
    run_dir = _run_dir(cfg, gate_kind, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    decision_cb = (_decision_logger(run_dir / "decisions.csv")
                   if cfg.log_decisions else None)
    result = run_from_pretrained(net, pre_reports, split, pcfg,
                                 decision_cb=decision_cb)
    summary = _write_run_artifacts(run_dir, cfg, gate_kind, seed, result)
    fail_note = " (fail)" if summary.failed else ""
    print(f"[{gate_kind} seed {seed}] basic acc {summary.basic_acc:.4f}"
          f" best acc {summary.best_acc:.4f}{fail_note}")
    return 0


def cmd_report(args) -> int:
    from .figures import save_accepted_curve, save_epoch_curves
    from .metrics import (aggregate_seeds, emit_error_rate_table, emit_table,
                          read_summary_csv)
    from .protocol import read_epoch_log

    run_dirs = []
    for root in args.runs:
        root = Path(root)
        if (root / "summary.csv").exists():
            run_dirs.append(root)
        else:
            run_dirs += sorted(p.parent for p in root.glob("*/summary.csv"))
    if not run_dirs:
        print("error: no run directories with summary.csv found",
              file=sys.stderr)
        return 2
    out = Path(args.out_dir or (Path(args.runs[0]) / "report"))
    out.mkdir(parents=True, exist_ok=True)

    by_gate: dict[str, dict[int, list]] = {}
    for rd in run_dirs:
        s = read_summary_csv(rd / "summary.csv")
        by_gate.setdefault(s.gate_kind, {}).setdefault(s.training_size,
                                                       []).append(s)
        reports = read_epoch_log(rd / "epoch_log.csv")
        save_epoch_curves(reports, out / f"epoch_curves_{rd.name}.png",
                          title=rd.name)
        save_accepted_curve(reports, out / f"accepted_{rd.name}.png")

    error_rows = []
    for gate_kind, by_size in sorted(by_gate.items()):
        rows = []
        for size in sorted(by_size):
            group = by_size[size]
            rows.append(group[0] if len(group) == 1
                        else aggregate_seeds(group).median)
        for fmt, ext in (("markdown", "md"), ("csv", "csv")):
            text = emit_table(rows, fmt)
            (out / f"results_{gate_kind}.{ext}").write_text(text)
        best = max((r for r in rows if not r.failed),
                   key=lambda r: r.best_acc, default=None)
        if best is not None:
            error_rows.append((f"self training with {gate_kind} (this run)",
                               100.0 * (1.0 - best.best_acc)))
    for fmt, ext in (("markdown", "md"), ("csv", "csv")):
        (out / f"error_rates.{ext}").write_text(
            emit_error_rate_table(error_rows, fmt))
    print(f"report written to {out}")
    return 0


def cmd_fetch_data(args) -> int:
    import gzip
    import hashlib
    import urllib.error
    import urllib.request

    data_dir = Path(args.data_dir or os.environ.get(DATA_DIR_ENV, "data"))
    data_dir.mkdir(parents=True, exist_ok=True)
    base = args.base_url
    if not base.endswith("/"):
        base += "/"
    for gz_name, md5 in MNIST_GZ_MD5.items():
        target = data_dir / gz_name.removesuffix(".gz")
        if target.exists():
            print(f"{target} already present, skipping")
            continue
        url = base + gz_name
        print(f"downloading {url}")
        try:
            with urllib.request.urlopen(url, timeout=60) as r:
                payload = r.read()
        except (urllib.error.URLError, OSError) as exc:
            print(f"error: download failed: {exc}", file=sys.stderr)
            return 1
        if not args.no_checksum:
            digest = hashlib.md5(payload).hexdigest()
            if digest != md5:
                print(f"error: checksum mismatch for {gz_name}: "
                      f"expected {md5}, got {digest}", file=sys.stderr)
                return 1
        target.write_bytes(gzip.decompress(payload))
        print(f"wrote {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selftrain",
        description="Confidence-gated self-training experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="pretrain + selftrain, seed/gate sweeps")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pretrain", help="supervised pretraining only")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("selftrain", help="self-train from a checkpoint")
    _add_experiment_flags(p)
    p.add_argument("--checkpoint", required=True,
                   help="pretrain.npz produced by the pretrain command")
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("report", help="tables and figures from finished runs")
    p.add_argument("runs", nargs="+", help="run directories (or their parent)")
    p.add_argument("--out", dest="out_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fetch-data", help="download and unpack MNIST")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--base-url", default=DEFAULT_MIRROR)
    p.add_argument("--no-checksum", action="store_true")
    p.set_defaults(func=cmd_fetch_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _apply_thread_hint(argv)
    args = build_parser().parse_args(argv)
    from .config import ConfigError
    from .training import TrainingDiverged

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
