"""Experiment configuration: plain-text key=value files, flag overrides,
validation that names the offending field, and a resolved echo for
reproducibility."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .gates import GATE_KINDS, GateConfig
from .protocol import EnsembleConfig, ProtocolConfig, Seeds
from .rng import derive
from .schedules import LinearSchedule


class ConfigError(ValueError):
    """Invalid or unknown configuration; message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "mnist"  # "mnist" or "synth"
    data_dir: str | None = None
    out_dir: str = "runs"
    labeled_size: int = 300
    unlabeled_size: int | None = None  # None = all remaining
    train_pool: int = 50000
    gate: str = "credible_interval"
    gates: tuple[str, ...] = ()  # optional sweep; overrides `gate`
    theta_start: float = 0.98
    theta_end: float = 0.90
    lambda_start: float = 1.0
    lambda_end: float = 0.0
    alpha: float = 0.05
    mc_samples: int = 80
    per_voter_floor: float | None = None
    pretrain_epochs: int = 40
    selftrain_epochs: int = 100
    lr: float = 1e-2
    batch_size: int = 32
    seeds: tuple[int, ...] = (0,)
    precision: str = "f64"
    threads: int | None = None  # hint only; results are schedule-independent
    ensemble_lr: float = 1e-2
    ensemble_lambda: float = 0.1
    max_accept_fraction: float | None = None
    log_decisions: bool = False
    # synthetic oracle world
    synth_dim: int = 1
    synth_gap: float = 4.0  # distance between the class means, in sigmas
    synth_sigma: float = 1.0
    synth_test: int = 2000

    def run_gates(self) -> tuple[str, ...]:
        return self.gates if self.gates else (self.gate,)


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_opt_int(s: str):
    return None if s.lower() in ("all", "none", "") else int(s)


def _parse_opt_str(s: str):
    return None if s.lower() in ("none", "") else s


def _parse_opt_float(s: str):
    return None if s.lower() in ("none", "") else float(s)


def _parse_int_list(s) -> tuple[int, ...]:
    if isinstance(s, (list, tuple)):
        return tuple(int(x) for x in s)
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _parse_str_list(s) -> tuple[str, ...]:
    if isinstance(s, (list, tuple)):
        return tuple(s)
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


_PARSERS = {
    "dataset": str, "data_dir": _parse_opt_str, "out_dir": str,
    "labeled_size": int, "unlabeled_size": _parse_opt_int, "train_pool": int,
    "gate": str, "gates": _parse_str_list,
    "theta_start": float, "theta_end": float,
    "lambda_start": float, "lambda_end": float,
    "alpha": float, "mc_samples": int, "per_voter_floor": _parse_opt_float,
    "pretrain_epochs": int, "selftrain_epochs": int,
    "lr": float, "batch_size": int, "seeds": _parse_int_list,
    "precision": str, "threads": _parse_opt_int,
    "ensemble_lr": float, "ensemble_lambda": float,
    "max_accept_fraction": _parse_opt_float, "log_decisions": _parse_bool,
    "synth_dim": int, "synth_gap": float, "synth_sigma": float,
    "synth_test": int,
}


def read_config_file(path: str | Path) -> dict:
    """`key = value` lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(file_values: dict | None = None,
                 overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults <- config file <- flag overrides, then validate."""
    merged = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _PARSERS:
                raise ConfigError(f"unknown key {key!r}")
            try:
                merged[key] = (_PARSERS[key](value)
                               if isinstance(value, str) else value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    cfg = ExperimentConfig(**merged)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    def fail(fieldname, why):
        raise ConfigError(f"{fieldname}: {why}")

    if cfg.dataset not in ("mnist", "synth"):
        fail("dataset", f"must be mnist or synth, got {cfg.dataset!r}")
    if cfg.dataset == "mnist" and not cfg.data_dir:
        fail("data_dir", "required for the MNIST dataset (flag --data-dir "
                         "or SELFTRAIN_DATA_DIR)")
    for kind in cfg.run_gates():
        if kind not in GATE_KINDS:
            fail("gate", f"unknown gate {kind!r}; choose from {GATE_KINDS}")
    if cfg.labeled_size < 1:
        fail("labeled_size", "must be >= 1")
    if cfg.unlabeled_size is not None and cfg.unlabeled_size < 0:
        fail("unlabeled_size", "must be >= 0 or 'all'")
    for name, v in (("theta_start", cfg.theta_start), ("theta_end", cfg.theta_end)):
        if not 0.0 < v < 1.0:
            fail(name, f"must be in (0, 1), got {v}")
    for name, v in (("lambda_start", cfg.lambda_start),
                    ("lambda_end", cfg.lambda_end)):
        if not -1.0 <= v <= 1.0:
            fail(name, f"must be in [-1, 1], got {v}")
    if not 0.0 < cfg.alpha < 1.0:
        fail("alpha", f"must be in (0, 1), got {cfg.alpha}")
    if cfg.mc_samples < 1:
        fail("mc_samples", "must be >= 1")
    if cfg.pretrain_epochs < 1:
        fail("pretrain_epochs", "must be >= 1")
    if cfg.selftrain_epochs < 0:
        fail("selftrain_epochs", "must be >= 0")
    if cfg.lr <= 0:
        fail("lr", "must be > 0")
    if cfg.batch_size < 1:
        fail("batch_size", "must be >= 1")
    if not cfg.seeds:
        fail("seeds", "need at least one seed")
    if cfg.precision not in ("f32", "f64"):
        fail("precision", f"must be f32 or f64, got {cfg.precision!r}")
    if cfg.max_accept_fraction is not None and not 0 < cfg.max_accept_fraction <= 1:
        fail("max_accept_fraction", "must be in (0, 1] or none")
    if cfg.synth_dim < 1:
        fail("synth_dim", "must be >= 1")
    if cfg.synth_sigma <= 0:
        fail("synth_sigma", "must be > 0")


def echo_config(cfg: ExperimentConfig, path: str | Path) -> None:
    """Write the fully-resolved configuration back out as key = value."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    Path(path).write_text("\n".join(lines) + "\n")


def config_hash(cfg: ExperimentConfig, gate_kind: str) -> str:
    """Stable digest of the training-relevant fields (seeds excluded), used
    to refuse aggregating runs from different configurations."""
    payload = {f.name: getattr(cfg, f.name) for f in fields(cfg)
               if f.name not in ("seeds", "out_dir", "threads", "data_dir",
                                 "log_decisions")}
    payload["gate"] = gate_kind
    payload.pop("gates", None)
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def protocol_for(cfg: ExperimentConfig, gate_kind: str,
                 master_seed: int) -> ProtocolConfig:
    """ProtocolConfig for one (gate, seed) run of this experiment."""
    floor = cfg.per_voter_floor
    if floor is None and gate_kind == "dropout_consensus":
        floor = 0.95
    if floor is None and gate_kind == "ensemble_consensus":
        floor = 0.5
    gate = GateConfig(kind=gate_kind, threshold=cfg.theta_start,
                      mc_passes=cfg.mc_samples, alpha=cfg.alpha,
                      per_voter_floor=floor)
    n_epochs = max(cfg.selftrain_epochs, 1)
    seeds = Seeds(network=derive(master_seed, 1), split=derive(master_seed, 2),
                  mc=derive(master_seed, 3))
    ensemble = (EnsembleConfig(cfg.ensemble_lr, cfg.ensemble_lambda)
                if gate_kind == "ensemble_consensus" else None)
    return ProtocolConfig(
        gate=gate,
        theta_schedule=LinearSchedule(cfg.theta_start, cfg.theta_end, n_epochs),
        lambda_schedule=LinearSchedule(cfg.lambda_start, cfg.lambda_end, n_epochs),
        seeds=seeds, pretrain_epochs=cfg.pretrain_epochs,
        selftrain_epochs=cfg.selftrain_epochs, lr=cfg.lr,
        batch_size=cfg.batch_size, ensemble_second=ensemble,
        max_accept_fraction=cfg.max_accept_fraction)
