"""Self-training experiment engine: confidence-gated pseudo-labeling with
MC-dropout credible intervals."""

from .config import ConfigError, ExperimentConfig
from .data import Dataset, Split, make_split, synth_two_gaussians
from .gates import (GateConfig, GateDecision, gate_credible_interval,
                    gate_dropout_consensus, gate_ensemble, gate_expectation,
                    gate_softmax)
from .losses import LossConfig, entropy, loss_value, softmax
from .mc import MCPredictions, mc_predict
from .metrics import RunSummary, aggregate_seeds, compute_tp_p, emit_table
from .network import Network, build_convnet, build_mlp
from .protocol import (EpochReport, ProtocolConfig, Seeds, evaluate, pretrain,
                       pseudo_label_pass, run_protocol, self_train)
from .schedules import LinearSchedule
from .studentt import t_quantile
from .training import TrainingDiverged, backward_and_step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ExperimentConfig", "Dataset", "Split", "make_split",
    "synth_two_gaussians", "GateConfig", "GateDecision",
    "gate_credible_interval", "gate_dropout_consensus", "gate_ensemble",
    "gate_expectation", "gate_softmax", "LossConfig", "entropy", "loss_value",
    "softmax", "MCPredictions", "mc_predict", "RunSummary", "aggregate_seeds",
    "compute_tp_p", "emit_table", "Network", "build_convnet", "build_mlp",
    "EpochReport", "ProtocolConfig", "Seeds", "evaluate", "pretrain",
    "pseudo_label_pass", "run_protocol", "self_train", "LinearSchedule",
    "t_quantile", "TrainingDiverged", "backward_and_step",
]
