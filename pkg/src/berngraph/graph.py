"""Per-patient event graphs.

Every patient graph has one node per event.  Node values differ between
patients; the edge set is the population-level co-occurrence structure and
is shared by reference, never copied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .encoders import EdgeSet, NodeEncoding, node_value_matrix, node_values

__all__ = ["PatientGraph", "build_graph", "build_graphs", "isolated_nodes", "graph_to_dict"]


@dataclass(frozen=True)
class PatientGraph:
    node_values: np.ndarray
    edges: EdgeSet
    labels: np.ndarray
    row_id: int = 0
    group_id: Optional[Any] = None

    @property
    def n_nodes(self) -> int:
        return len(self.node_values)


def build_graph(x_row, labels_row, encoding: NodeEncoding, edges: EdgeSet,
                row_id: int = 0, group_id=None) -> PatientGraph:
    x = np.asarray(x_row)
    if len(x) != edges.n_nodes:
        raise ValueError(f"row has {len(x)} events but the edge set spans {edges.n_nodes} nodes")
    values = node_values(x, encoding, patient=row_id)
    if not np.isfinite(values).all():
        raise ValueError(f"non-finite node value for row {row_id}")
    return PatientGraph(values, edges, np.asarray(labels_row, dtype=np.float64),
                        int(row_id), group_id)


def build_graphs(x_rows, label_rows, encoding: NodeEncoding, edges: EdgeSet,
                 row_ids=None, group_ids=None) -> list:
    """Vectorised :func:`build_graph` over many rows."""
    x = np.asarray(x_rows)
    if x.ndim != 2 or x.shape[1] != edges.n_nodes:
        raise ValueError(f"rows have shape {x.shape}, edge set spans {edges.n_nodes} nodes")
    if row_ids is None:
        row_ids = list(range(x.shape[0]))
    values = node_value_matrix(x, encoding, patients=row_ids)
    labels = np.asarray(label_rows, dtype=np.float64)
    groups = [None] * x.shape[0] if group_ids is None else list(group_ids)
    return [PatientGraph(values[k], edges, labels[k], int(row_ids[k]), groups[k])
            for k in range(x.shape[0])]


def isolated_nodes(edges: EdgeSet, n_nodes: int = None) -> list:
    """Nodes with neither incoming nor outgoing edges."""
    m = edges.n_nodes if n_nodes is None else n_nodes
    deg = np.bincount(edges.src, minlength=m) + np.bincount(edges.dst, minlength=m)
    return [int(i) for i in np.flatnonzero(deg[:m] == 0)]


def graph_to_dict(graph: PatientGraph, event_names=None, drug_names=None) -> dict:
    names = event_names or [str(j) for j in range(graph.n_nodes)]
    nodes = [{"event": names[j], "index": j, "value": float(v)}
             for j, v in enumerate(graph.node_values)]
    edges = [{"src": int(s), "dst": int(d), "weight": float(w)}
             for s, d, w in zip(graph.edges.src, graph.edges.dst, graph.edges.weight)]
    labels = [int(v) for v in graph.labels]
    out = {"row_id": graph.row_id, "nodes": nodes, "edges": edges, "labels": labels}
    if drug_names is not None:
        out["label_names"] = [drug_names[c] for c, v in enumerate(labels) if v]
    return out
