"""Bernoulli event graphs for multi-label medication recommendation.

Sparse binary event rows become Bernoulli statistics, per-patient graphs
share one conditional-probability edge set, and an edge-featured
message-passing network maps each graph to drug probabilities.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .cohort import DatasetSplit, EventCohort, load_cohort, save_cohort, sparsity, split
from .encoders import edge_weights, node_values, prepare_node_encoding
from .gnn import (GNNModel, GNNParams, backward, backward_batch, bce_loss, forward, forward_batch,
                  init_params)
from .graph import PatientGraph, build_graph, build_graphs, isolated_nodes
from .metrics import MetricsReport, bootstrap_eval, group_eval, metrics
from .optim import AdamState, adam_step
from .stats import BernoulliStats, compute_stats
from .synth import SynthConfig, brute_force_stats, generate, make_config
from .training import TrainConfig, evaluate, predict, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BernoulliStats", "DatasetSplit", "EventCohort", "GNNModel", "GNNParams",
    "MetricsReport", "PatientGraph", "SynthConfig", "TrainConfig",
    "adam_step", "backward", "backward_batch", "bce_loss", "bootstrap_eval", "brute_force_stats", "build_graph",
    "build_graphs", "compute_stats", "edge_weights", "evaluate", "forward", "forward_batch", "generate",
    "group_eval", "init_params", "isolated_nodes", "load_checkpoint", "load_cohort",
    "make_config", "metrics", "node_values", "predict", "prepare_node_encoding",
    "save_checkpoint", "save_cohort", "sparsity", "split", "train",
]
