"""End-to-end training and evaluation on a cohort split.

Statistics and encodings are fitted on the training rows and then reused,
frozen, for validation and test rows.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from .baselines import train_lr, train_mlp
from .cohort import DatasetSplit, EventCohort
from .encoders import (EDGE_MODES, NODE_MODES, EdgeSet, NodeEncoding, edge_weights,
                       node_value_matrix, prepare_node_encoding)
from .gnn import GNNModel, init_params
from .metrics import bootstrap_eval, metrics, predictions_from_probs
from .stats import BernoulliStats, compute_stats
from .trainer import fit

__all__ = [
    "MODEL_KINDS",
    "TrainConfig",
    "FeatureSet",
    "TrainResult",
    "prepare_features",
    "train",
    "predict",
    "evaluate",
]

log = logging.getLogger(__name__)

MODEL_KINDS = ("gnn", "lr", "mlp")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    hidden: int = 128
    layers: int = 2
    node_mode: str = "bm"
    edge_mode: str = "post"
    encoding_seed: Optional[int] = None      # defaults to ``seed``
    min_joint: int = 1
    model: str = "gnn"
    lr_input: str = "raw"                    # LR consumes raw 0/1 rows or encoded values
    l2: float = 0.0
    patience: int = 0                        # 0 disables early stopping
    dtype: str = "float64"
    all_rows_stats: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden < 1 or self.layers < 1:
            raise ValueError("hidden and layers must be >= 1")
        if self.node_mode not in NODE_MODES:
            raise ValueError(f"node_mode must be one of {NODE_MODES}")
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"edge_mode must be one of {EDGE_MODES}")
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}")
        if self.lr_input not in ("raw", "encoded"):
            raise ValueError("lr_input must be 'raw' or 'encoded'")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")
        if self.min_joint < 1:
            raise ValueError("min_joint must be >= 1")

    @property
    def enc_seed(self) -> int:
        return self.seed if self.encoding_seed is None else self.encoding_seed

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]

    def updated(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass
class FeatureSet:
    """Everything fitted on training rows that turns cohort rows into inputs."""

    stats: BernoulliStats
    node_encoding: NodeEncoding
    edges: EdgeSet
    config: TrainConfig

    def node_values(self, cohort: EventCohort, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        return node_value_matrix(cohort.event_rows(rows), self.node_encoding, patients=rows)

    def inputs(self, cohort: EventCohort, rows) -> np.ndarray:
        """Model inputs for ``rows`` according to the configured model kind."""
        cfg = self.config
        if cfg.model == "lr" and cfg.lr_input == "raw":
            x = cohort.event_rows(rows)
        else:
            x = self.node_values(cohort, rows)
        return x.astype(cfg.np_dtype)


def prepare_features(cohort: EventCohort, split: DatasetSplit, config: TrainConfig) -> FeatureSet:
    train_rows = np.asarray(split.train_rows, dtype=np.int64)
    stat_rows = None if config.all_rows_stats else train_rows
    stats = compute_stats(cohort.events, stat_rows, threads=config.threads)
    node_mode = "bm" if config.model == "mlp" else config.node_mode
    events = drugs = None
    if node_mode in ("llr", "te"):
        events = cohort.event_rows(train_rows)
        drugs = cohort.label_rows(train_rows)
    encoding = prepare_node_encoding(node_mode, stats, events, drugs, seed=config.enc_seed)
    edges = edge_weights(stats, config.edge_mode, seed=config.enc_seed, min_joint=config.min_joint)
    return FeatureSet(stats, encoding, edges, config)


@dataclass
class TrainResult:
    model: object
    history: list
    features: FeatureSet
    config: TrainConfig


def build_model(features: FeatureSet, n_drugs: int):
    cfg = features.config
    if cfg.model == "gnn":
        params = init_params(features.edges.n_nodes, n_drugs, cfg.hidden, cfg.layers,
                             seed=cfg.seed, dtype=cfg.np_dtype)
        return GNNModel(params, features.edges)
    raise ValueError(f"build_model only builds GNNs, got {cfg.model!r}")


def train(cohort: EventCohort, split: DatasetSplit, config: TrainConfig = TrainConfig(),
          features: FeatureSet = None, callback=None) -> TrainResult:
    """Fit the configured model on the training rows of ``split``."""
    features = features or prepare_features(cohort, split, config)
    x_tr = features.inputs(cohort, split.train_rows)
    y_tr = cohort.label_rows(split.train_rows)
    x_va = features.inputs(cohort, split.val_rows)
    y_va = cohort.label_rows(split.val_rows)
    common = dict(lr=config.learning_rate, epochs=config.epochs, batch_size=config.batch_size,
                  seed=config.seed, x_val=x_va, y_val=y_va, patience=config.patience)
    if config.model == "gnn":
        model = build_model(features, cohort.n_drugs)
        history = fit(model, x_tr, y_tr, callback=callback, **common)
    elif config.model == "lr":
        model, history = train_lr(x_tr, y_tr, l2=config.l2, dtype=config.np_dtype, **common)
    else:
        model, history = train_mlp(x_tr, y_tr, dtype=config.np_dtype, **common)
    return TrainResult(model, history, features, config)


def predict(model, inputs) -> list:
    """Thresholded predictions for already-encoded ``inputs``."""
    return predictions_from_probs(model.predict_proba(inputs))


def evaluate(result: TrainResult, cohort: EventCohort, rows, labels=None, rounds: int = 0,
             frac: float = 0.8, seed: int = 0):
    """Metrics of ``result.model`` on ``rows``.

    ``labels`` overrides the cohort labels (e.g. noise-free ground truth).
    With ``rounds > 0`` the bootstrap protocol is used.
    """
    x = result.features.inputs(cohort, rows)
    probs = result.model.predict_proba(x)
    y = cohort.label_rows(rows) if labels is None else np.asarray(labels)
    if rounds:
        return bootstrap_eval(probs, y, rounds=rounds, frac=frac, seed=seed)
    return metrics(probs, y)
