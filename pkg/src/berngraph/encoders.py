"""Node-value and edge-weight encodings for the ablation grid.

Node modes: ``bm`` (Bernoulli mean), ``llr`` (Dunning log-likelihood ratio
against the drugs), ``te`` (target encoding), ``rn`` (random).  Edge modes:
``post`` (conditional probability), ``cooc`` (joint relative frequency),
``re`` (random).  All edge modes share one support: the stored co-occurring
pairs, in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .stats import BernoulliStats

__all__ = [
    "NODE_MODES",
    "EDGE_MODES",
    "NodeEncoding",
    "EdgeSet",
    "entropy_term",
    "llr_2x2",
    "llr_score",
    "llr_node_scores",
    "target_encode",
    "prepare_node_encoding",
    "node_values",
    "node_value_matrix",
    "edge_weights",
]

NODE_MODES = ("bm", "llr", "te", "rn")
EDGE_MODES = ("post", "cooc", "re")

# second key of the seed sequence, keeps the node and edge random streams apart
_NODE_STREAM = 0x4E4F4445
_EDGE_STREAM = 0x45444745


@dataclass(frozen=True)
class NodeEncoding:
    """Per-event values for an observed 1 and an observed 0.

    Random mode ignores the tables and draws from a generator keyed by
    ``(seed, patient)``.
    """

    mode: str
    when_present: Optional[np.ndarray]
    when_absent: Optional[np.ndarray]
    seed: int = 0
    n_events: int = 0

    def __post_init__(self):
        if self.mode not in NODE_MODES:
            raise ValueError(f"unknown node mode {self.mode!r}; expected one of {NODE_MODES}")


@dataclass(frozen=True)
class EdgeSet:
    """Directed weighted edges ``src -> dst`` shared by every patient graph."""

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    mode: str = "post"

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_nodes)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_nodes)

    def permuted(self, order) -> "EdgeSet":
        order = np.asarray(order)
        return EdgeSet(self.n_nodes, self.src[order], self.dst[order], self.weight[order], self.mode)


# ---------------------------------------------------------------------------
# log-likelihood ratio
# ---------------------------------------------------------------------------


def entropy_term(values) -> float:
    """``sum(p * ln p)`` over ``p = v / sum(v)`` with ``0 ln 0 = 0``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    total = v.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero count vector is undefined")
    p = v[v > 0] / total
    return float(np.sum(p * np.log(p)))


def llr_2x2(k11, k12, k21, k22) -> float:
    """Dunning's G statistic for a 2x2 contingency table (natural log).

    Evaluated as ``2 * sum(k * ln(k * T / (row * col)))``, which is the
    entropy form ``2T(H(k) - H(rows) - H(cols))`` rearranged; integer
    products keep it exactly zero for independent tables.
    """
    k = np.array([[k11, k12], [k21, k22]], dtype=np.int64)
    if (k < 0).any():
        raise ValueError("contingency counts must be non-negative")
    total = int(k.sum())
    if total == 0:
        raise ValueError("degenerate contingency table: total count is zero")
    rows = k.sum(axis=1)
    cols = k.sum(axis=0)
    g = 0.0
    for a in range(2):
        for b in range(2):
            if k[a, b] > 0:
                g += k[a, b] * np.log((int(k[a, b]) * total) / (int(rows[a]) * int(cols[b])))
    return max(0.0, 2.0 * g)


def _contingency(event_col, drug_col):
    x = np.asarray(event_col).astype(bool)
    y = np.asarray(drug_col).astype(bool)
    k11 = int(np.sum(x & y))
    k12 = int(np.sum(x & ~y))
    k21 = int(np.sum(~x & y))
    k22 = int(np.sum(~x & ~y))
    return k11, k12, k21, k22


def llr_score(event_col, drug_cols) -> float:
    """Mean LLR of one event column against every drug column (unscaled)."""
    drug_cols = np.asarray(drug_cols)
    if drug_cols.ndim == 1:
        drug_cols = drug_cols[:, None]
    if len(event_col) < 1:
        raise ValueError("need at least one row")
    scores = [llr_2x2(*_contingency(event_col, drug_cols[:, c])) for c in range(drug_cols.shape[1])]
    return float(np.mean(scores))


def llr_node_scores(events, drugs) -> np.ndarray:
    """Per-event mean LLR, min-max rescaled to ``[0, 1]`` across events."""
    events = np.asarray(events)
    drugs = np.asarray(drugs)
    n = events.shape[0]
    if n < 1:
        raise ValueError("need at least one row")
    x = events.astype(np.int64)
    y = drugs.astype(np.int64)
    # all 2x2 tables at once: k11[j, c] = #(x_j = 1, y_c = 1)
    k11 = x.T @ y
    ex = x.sum(axis=0)[:, None]
    dy = y.sum(axis=0)[None, :]
    k12 = ex - k11
    k21 = dy - k11
    k22 = n - k11 - k12 - k21
    raw = np.zeros(x.shape[1])
    for j in range(x.shape[1]):
        raw[j] = np.mean([llr_2x2(k11[j, c], k12[j, c], k21[j, c], k22[j, c])
                          for c in range(y.shape[1])])
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# target encoding
# ---------------------------------------------------------------------------


def target_encode(event_col, drug_cols):
    """Mean drug label among rows with the event absent / present.

    Returns ``(te_absent, te_present)``; each is averaged over drugs.  An
    empty category falls back to the global mean label.
    """
    x = np.asarray(event_col).astype(bool)
    y = np.asarray(drug_cols, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    fallback = float(y.mean())
    out = []
    for mask in (~x, x):
        cnt = int(mask.sum())
        out.append(float(np.mean(y[mask].sum(axis=0) / cnt)) if cnt else fallback)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# node values
# ---------------------------------------------------------------------------


def prepare_node_encoding(mode: str, stats: BernoulliStats = None, events=None, drugs=None,
                          seed: int = 0) -> NodeEncoding:
    """Fit a node encoding on training data.

    ``bm`` needs ``stats``; ``llr`` and ``te`` need dense training ``events``
    and ``drugs``; ``rn`` only needs the event count (taken from whichever
    input is given).
    """
    if mode == "bm":
        rho = np.asarray(stats.marginals, dtype=np.float64)
        return NodeEncoding("bm", rho.copy(), 1.0 - rho, seed, len(rho))
    if mode == "llr":
        s = llr_node_scores(events, drugs)
        return NodeEncoding("llr", s, 1.0 - s, seed, len(s))
    if mode == "te":
        events = np.asarray(events)
        pres = np.empty(events.shape[1])
        absent = np.empty(events.shape[1])
        for j in range(events.shape[1]):
            absent[j], pres[j] = target_encode(events[:, j], drugs)
        return NodeEncoding("te", pres, absent, seed, events.shape[1])
    if mode == "rn":
        m = stats.n_events if stats is not None else np.asarray(events).shape[1]
        return NodeEncoding("rn", None, None, seed, m)
    raise ValueError(f"unknown node mode {mode!r}; expected one of {NODE_MODES}")


def _random_row(seed: int, patient: int, m: int) -> np.ndarray:
    return np.random.default_rng([seed, _NODE_STREAM, patient]).random(m)


def node_values(x_row, encoding: NodeEncoding, patient: int = 0) -> np.ndarray:
    """Scalar initial value for every event node of one patient."""
    x = np.asarray(x_row)
    if x.ndim != 1 or len(x) != encoding.n_events:
        raise ValueError(f"row has length {x.shape}, encoding expects {encoding.n_events}")
    if encoding.mode == "rn":
        return _random_row(encoding.seed, int(patient), encoding.n_events)
    return np.where(x == 1, encoding.when_present, encoding.when_absent).astype(np.float64)


def node_value_matrix(x_rows, encoding: NodeEncoding, patients=None) -> np.ndarray:
    """Row-stacked :func:`node_values`; ``patients`` keys the random mode."""
    x = np.asarray(x_rows)
    if x.ndim != 2 or x.shape[1] != encoding.n_events:
        raise ValueError(f"rows have shape {x.shape}, encoding expects {encoding.n_events} columns")
    if encoding.mode == "rn":
        if patients is None:
            patients = range(x.shape[0])
        return np.stack([_random_row(encoding.seed, int(p), encoding.n_events) for p in patients]) \
            if x.shape[0] else np.zeros((0, encoding.n_events))
    return np.where(x == 1, encoding.when_present[None, :], encoding.when_absent[None, :]).astype(np.float64)


# ---------------------------------------------------------------------------
# edges
# ---------------------------------------------------------------------------


def edge_weights(stats: BernoulliStats, mode: str = "post", seed: int = 0,
                 min_joint: int = 1) -> EdgeSet:
    """Directed edges ``j -> i`` for every stored pair with ``joint >= min_joint``.

    ``post`` weighs ``j -> i`` by ``P(E_i=1 | E_j=1)``; ``cooc`` by
    ``joint / n_rows`` in both directions; ``re`` by a seeded uniform draw per
    directed edge.  Edges are sorted by ``(dst, src)``.
    """
    if mode not in EDGE_MODES:
        raise ValueError(f"unknown edge mode {mode!r}; expected one of {EDGE_MODES}")
    keep = stats.cond_joint >= max(1, int(min_joint))
    dst = stats.cond_i[keep].astype(np.int64)
    src = stats.cond_j[keep].astype(np.int64)
    joint = stats.cond_joint[keep]
    post = stats.cond_value[keep]
    order = np.lexsort((src, dst))
    dst, src, joint, post = dst[order], src[order], joint[order], post[order]
    if mode == "post":
        w = post.astype(np.float64)
    elif mode == "cooc":
        w = joint / float(stats.n_rows)
    else:
        w = np.random.default_rng([seed, _EDGE_STREAM]).random(len(src))
    return EdgeSet(stats.n_events, src, dst, w, mode)
