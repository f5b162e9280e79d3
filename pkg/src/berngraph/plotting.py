"""Figures written next to the CLI's tabular outputs.

Everything renders with the non-interactive Agg backend and returns the
path written, so the functions are safe in headless runs.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ._io import atomic_write_bytes  # noqa: E402

__all__ = ["plot_ablation", "plot_graph", "plot_history", "plot_bootstrap"]

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    # keeps PNG bytes stable across runs
    "svg.hashsalt": "berngraph",
}


def _save(fig, path) -> Path:
    path = Path(path)
    buf = io.BytesIO()
    fig.savefig(buf, format=path.suffix.lstrip(".") or "png", bbox_inches="tight",
                metadata={"Software": None} if path.suffix in ("", ".png") else None)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())
    return path


def plot_ablation(rows, path, metric: str = "jaccard") -> Path:
    """Bar chart of one metric across ablation arms.

    ``rows`` are dicts with at least ``arm`` and ``metric`` (``*_std`` is
    drawn as an error bar when present).
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(rows) + 1.5), 3.0))
        names = [r["arm"] for r in rows]
        vals = [float(r[metric]) for r in rows]
        errs = [float(r.get(f"{metric}_std") or 0.0) for r in rows]
        colors = ["#4c72b0" if r.get("model", "gnn") == "gnn" else "#999999" for r in rows]
        ax.bar(range(len(rows)), vals, yerr=errs if any(errs) else None, color=colors, capsize=2)
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(names, rotation=60, ha="right")
        ax.set_ylabel(metric)
        ax.set_ylim(0, max(1.0, max(vals, default=0) * 1.05))
        return _save(fig, path)


def plot_graph(viz: dict, path, title: str = None) -> Path:
    """Draw an exported patient graph on a circle.

    Edge width grows with the edge weight; top-k nodes are filled red.
    """
    nodes = viz["nodes"]
    m = len(nodes)
    angle = 2 * np.pi * np.arange(m) / max(m, 1)
    xy = np.column_stack([np.cos(angle), np.sin(angle)])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        edges = viz["edges"]
        wmax = max((e["weight"] for e in edges), default=1.0) or 1.0
        for e in edges:
            a, b = xy[e["src"]], xy[e["dst"]]
            ax.plot([a[0], b[0]], [a[1], b[1]], color="#555555", alpha=0.5,
                    linewidth=0.3 + 2.5 * e["weight"] / wmax, zorder=1)
        top = np.array([n["top_k"] for n in nodes], dtype=bool)
        act = np.array([n["activation"] for n in nodes], dtype=float)
        size = 20 + 80 * (np.abs(act) / (np.abs(act).max() or 1.0))
        ax.scatter(xy[~top, 0], xy[~top, 1], s=size[~top], color="#bbbbbb", edgecolor="k", zorder=2)
        ax.scatter(xy[top, 0], xy[top, 1], s=size[top], color="#d62728", edgecolor="k", zorder=3)
        if m <= 60:
            for n, (x, y) in zip(nodes, xy):
                ax.annotate(n["event"], (x * 1.12, y * 1.12), ha="center", va="center", fontsize=6)
        ax.set_aspect("equal")
        ax.axis("off")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_history(history, path) -> Path:
    """Training loss (and validation Jaccard when recorded) per epoch."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ep = [h["epoch"] for h in history]
        ax.plot(ep, [h["train_loss"] for h in history], label="train loss")
        if history and "val_loss" in history[0]:
            ax.plot(ep, [h["val_loss"] for h in history], label="val loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("BCE")
        if history and "val_jaccard" in history[0]:
            ax2 = ax.twinx()
            ax2.plot(ep, [h["val_jaccard"] for h in history], color="#2ca02c", linestyle="--",
                     label="val jaccard")
            ax2.set_ylabel("val jaccard")
            ax2.set_ylim(0, 1)
        ax.legend(loc="upper right", frameon=False)
        return _save(fig, path)


def plot_bootstrap(rounds, path, metrics=("jaccard", "f1", "prauc", "auroc")) -> Path:
    """Per-round metric values as strip plot with the mean marked."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for i, name in enumerate(metrics):
            vals = np.array([r[name] for r in rounds], dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            ax.scatter(np.full(vals.size, i) + np.linspace(-0.15, 0.15, vals.size), vals, s=10)
            ax.hlines(vals.mean(), i - 0.25, i + 0.25, color="k")
        ax.set_xticks(range(len(metrics)))
        ax.set_xticklabels(metrics)
        ax.set_ylim(0, 1.02)
        return _save(fig, path)
