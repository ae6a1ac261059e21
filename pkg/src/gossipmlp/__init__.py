"""Consensus-trained multi-layer perceptrons over peer-to-peer graphs.

Nodes hold vertically partitioned features (all rows, a subset of columns),
train local MLPs, and gossip prediction vectors with random neighbors; the
loss of the averaged predictions drives backpropagation at both peers, so
every node tracks the global objective without any feature data leaving its
machine.
"""

from .data import Dataset, load_dataset, parse_label_rule, scale_features
from .errors import (
    ConfigurationError,
    DataError,
    GossipMlpError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .estimators import GossipMlpClassifier, MlpClassifier
from .experiment import (
    ExperimentConfig,
    load_config,
    run_centralized,
    run_distributed,
    run_suite,
    sweep_overlap,
)
from .gossip import (
    GossipTrainingParams,
    NodeState,
    RoundLog,
    Topology,
    build_topology,
    distributed_predict,
    run_round,
    run_training,
)
from .metrics import (
    AucEstimate,
    ConfidenceInterval,
    averaged_auc_over_trials,
    convergence_metric,
    hanley_mcneil_ci,
    roc_auc,
    roc_curve_points,
)
from .mlp import (
    ForwardTrace,
    Gradients,
    LayerSpec,
    MlpModel,
    backward,
    batch_forward,
    batch_predict,
    compute_loss,
    forward,
    init_model,
    loss_residual,
    sgd_step,
)
from .partition import VerticalPartition, make_partition, project

__version__ = "0.1.0"

__all__ = [
    "AucEstimate",
    "ConfidenceInterval",
    "ConfigurationError",
    "DataError",
    "Dataset",
    "ExperimentConfig",
    "ForwardTrace",
    "GossipMlpClassifier",
    "GossipMlpError",
    "GossipTrainingParams",
    "Gradients",
    "LayerSpec",
    "MlpClassifier",
    "MlpModel",
    "NodeState",
    "RoundLog",
    "Topology",
    "TrainingDivergedError",
    "UndefinedMetricError",
    "VerticalPartition",
    "averaged_auc_over_trials",
    "backward",
    "batch_forward",
    "batch_predict",
    "build_topology",
    "compute_loss",
    "convergence_metric",
    "distributed_predict",
    "forward",
    "hanley_mcneil_ci",
    "init_model",
    "load_config",
    "load_dataset",
    "loss_residual",
    "make_partition",
    "parse_label_rule",
    "project",
    "roc_auc",
    "roc_curve_points",
    "run_centralized",
    "run_distributed",
    "run_round",
    "run_suite",
    "run_training",
    "scale_features",
    "sgd_step",
    "sweep_overlap",
]
