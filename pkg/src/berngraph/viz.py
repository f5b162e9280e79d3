"""Top-k node export for plotting a patient graph."""

from __future__ import annotations

import numpy as np

from .gnn import GNNModel

__all__ = ["export_viz", "top_k_flags"]


def top_k_flags(scores, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` largest scores; ties go to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    m = scores.size
    if not 1 <= k <= m:
        raise ValueError(f"k={k} is out of range for {m} nodes (need 1 <= k <= {m})")
    order = np.lexsort((np.arange(m), -scores))
    flags = np.zeros(m, dtype=bool)
    flags[order[:k]] = True
    return flags


def export_viz(model: GNNModel, values, k: int, event_names=None, row_id=None) -> dict:
    """Per-node final-layer scalars, top-k flags and edge weights as a dict.

    ``values`` is one patient's node-value vector (length M).
    """
    if getattr(model, "kind", None) != "gnn":
        raise ValueError("export-viz needs a GNN model")
    values = np.asarray(values, dtype=model.arrays["W_in"].dtype).reshape(1, -1)
    act = model.node_outputs(values)[0].astype(np.float64)
    flags = top_k_flags(act, k)
    m = act.size
    names = list(event_names) if event_names is not None else [str(j) for j in range(m)]
    plan = model.plan
    return {
        "row_id": row_id,
        "k": int(k),
        "nodes": [{"index": j, "event": names[j], "value": float(values[0, j]),
                   "activation": float(act[j]), "top_k": bool(flags[j])} for j in range(m)],
        "edges": [{"src": int(s), "dst": int(d), "weight": float(w)}
                  for s, d, w in zip(plan.src, plan.dst, plan.weight)],
    }
