"""Example-based multi-label metrics and the evaluation protocols.

Every metric is computed per row over that row's C drug decisions and then
averaged across rows.  Means use ``math.fsum`` so they are independent of
row order.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "METRICS",
    "THRESHOLD",
    "Prediction",
    "MetricsReport",
    "threshold",
    "predictions_from_probs",
    "jaccard_row",
    "f1_row",
    "average_precision_row",
    "auroc_row",
    "row_metrics",
    "metrics",
    "group_eval",
    "bootstrap_eval",
]

METRICS = ("jaccard", "f1", "prauc", "auroc", "avg_drug")
THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    """Sigmoid outputs of one row and the thresholded recommendation."""

    probs: np.ndarray
    decisions: np.ndarray

    @classmethod
    def from_probs(cls, probs) -> "Prediction":
        p = np.asarray(probs, dtype=np.float64)
        return cls(p, threshold(p))


def threshold(probs) -> np.ndarray:
    """Recommend exactly the drugs with output strictly above 0.5."""
    return (np.asarray(probs) > THRESHOLD).astype(np.uint8)


def predictions_from_probs(probs) -> list:
    return [Prediction.from_probs(row) for row in np.atleast_2d(probs)]


def jaccard_row(pred, true) -> float:
    r, t = np.asarray(pred).astype(bool), np.asarray(true).astype(bool)
    union = np.sum(r | t)
    return 1.0 if union == 0 else float(np.sum(r & t)) / float(union)


def f1_row(pred, true) -> float:
    r, t = np.asarray(pred).astype(bool), np.asarray(true).astype(bool)
    denom = int(r.sum()) + int(t.sum())
    return 1.0 if denom == 0 else 2.0 * float(np.sum(r & t)) / denom


def average_precision_row(scores, true) -> Optional[float]:
    """Step-wise average precision; ``None`` when the row has no positives.

    Tied scores form a single threshold, as in a precision-recall curve.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(true).astype(bool)
    n_pos = int(t.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-s, kind="mergesort")
    s, t = s[order], t[order]
    tp = np.cumsum(t)
    # last index of every distinct score value
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp_at = tp[last].astype(np.float64)
    precision = tp_at / (last + 1)
    recall = tp_at / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def auroc_row(scores, true) -> Optional[float]:
    """Mann-Whitney AUROC with midranks; ``None`` when labels are constant."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(true).astype(bool)
    n_pos = int(t.sum())
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s, method="average")
    return float((ranks[t].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _as_arrays(predictions, labels):
    if isinstance(predictions, np.ndarray):
        probs = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    else:
        probs = np.array([p.probs for p in predictions], dtype=np.float64)
    labels = np.asarray(labels)
    if len(probs) != len(labels):
        raise ValueError(f"{len(probs)} predictions for {len(labels)} label rows")
    if len(probs) and probs.shape != labels.shape:
        raise ValueError(f"prediction shape {probs.shape} differs from labels {labels.shape}")
    return probs, labels


def row_metrics(predictions, labels) -> dict:
    """Per-row metric arrays; NaN marks rows skipped for PRAUC / AUROC."""
    probs, labels = _as_arrays(predictions, labels)
    decisions = threshold(probs)
    n = len(probs)
    out = {name: np.empty(n) for name in METRICS}
    for i in range(n):
        out["jaccard"][i] = jaccard_row(decisions[i], labels[i])
        out["f1"][i] = f1_row(decisions[i], labels[i])
        ap = average_precision_row(probs[i], labels[i])
        out["prauc"][i] = np.nan if ap is None else ap
        auc = auroc_row(probs[i], labels[i])
        out["auroc"][i] = np.nan if auc is None else auc
        out["avg_drug"][i] = float(decisions[i].sum())
    return out


def _mean(values) -> float:
    v = [float(x) for x in values if not math.isnan(x)]
    return math.fsum(v) / len(v) if v else float("nan")


@dataclass
class MetricsReport:
    mean: dict
    std: Optional[dict] = None
    skipped: dict = field(default_factory=dict)
    n_rows: int = 0
    rounds: Optional[list] = None     # per-round mean dicts when bootstrapped

    def __getattr__(self, name):
        if name in METRICS:
            return self.mean[name]
        raise AttributeError(name)

    def to_dict(self) -> dict:
        out = {"n_rows": self.n_rows, "mean": dict(self.mean), "skipped": dict(self.skipped)}
        if self.std is not None:
            out["std"] = dict(self.std)
        if self.rounds is not None:
            out["rounds"] = [dict(r) for r in self.rounds]
        return out


def _summarise(per_row: dict, rows=None) -> tuple:
    means, skipped = {}, {}
    for name in METRICS:
        arr = per_row[name] if rows is None else per_row[name][rows]
        means[name] = _mean(arr)
        skipped[name] = int(np.isnan(arr).sum())
    return means, skipped


def metrics(predictions, labels) -> MetricsReport:
    """Example-averaged Jaccard, F1, PRAUC, AUROC and mean #drugs."""
    per_row = row_metrics(predictions, labels)
    means, skipped = _summarise(per_row)
    return MetricsReport(means, None, skipped, len(per_row["jaccard"]))


def group_eval(predictions, labels, group_ids) -> MetricsReport:
    """Average rows within each group first, then across groups."""
    if group_ids is None:
        raise ValueError("group_eval needs group ids")
    per_row = row_metrics(predictions, labels)
    groups = list(group_ids)
    if len(groups) != len(per_row["jaccard"]) or any(g is None for g in groups):
        raise ValueError("every row needs a group id")
    members = {}
    for i, g in enumerate(groups):
        members.setdefault(g, []).append(i)
    means, skipped = {}, {}
    for name in METRICS:
        group_means = [_mean(per_row[name][idx]) for idx in members.values()]
        means[name] = _mean(group_means)
        skipped[name] = int(sum(math.isnan(m) for m in group_means))
    return MetricsReport(means, None, skipped, len(groups))


def bootstrap_eval(predictions, labels, rounds: int = 10, frac: float = 0.8,
                   seed: int = 0) -> MetricsReport:
    """Repeated subsampling without replacement of ``floor(frac * n)`` rows.

    Reports the per-metric mean and sample standard deviation over rounds.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must lie in (0, 1]")
    per_row = row_metrics(predictions, labels)
    n = len(per_row["jaccard"])
    if n == 0:
        raise ValueError("cannot bootstrap an empty test set")
    k = int(math.floor(frac * n))
    if k < 1:
        raise ValueError(f"frac={frac} selects no rows out of {n}")
    rng = np.random.default_rng(seed)
    per_round = []
    for _ in range(rounds):
        idx = np.sort(rng.choice(n, size=k, replace=False))
        per_round.append(_summarise(per_row, idx)[0])
    mean, std = {}, {}
    for name in METRICS:
        # exact rational mean/stdev: identical rounds give the value itself and std 0
        vals = [r[name] for r in per_round if not math.isnan(r[name])]
        mean[name] = statistics.mean(vals) if vals else float("nan")
        std[name] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    skipped = _summarise(per_row)[1]
    return MetricsReport(mean, std, skipped, n, per_round)
