"""Mini-batch Adam loop shared by the GNN and the baselines.

A model is any object with an ``arrays`` mapping, ``set_arrays``,
``loss_and_grad(x, y)`` and ``predict_proba(x)``.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .gnn import bce_loss
from .optim import adam_init, adam_step

__all__ = ["TrainingDiverged", "fit", "quick_scores"]

log = logging.getLogger(__name__)

# second key of the shuffling stream; the root seed is the first
_SHUFFLE_STREAM = 0x5348


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch
        self.loss = loss


def quick_scores(probs, labels) -> dict:
    """Vectorised Jaccard / F1 / #drug used for per-epoch monitoring."""
    r = np.asarray(probs) > 0.5
    t = np.asarray(labels).astype(bool)
    inter = (r & t).sum(axis=1)
    union = (r | t).sum(axis=1)
    size = r.sum(axis=1) + t.sum(axis=1)
    jac = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    f1 = np.where(size == 0, 1.0, 2.0 * inter / np.maximum(size, 1))
    return {"jaccard": float(jac.mean()), "f1": float(f1.mean()),
            "avg_drug": float(r.sum(axis=1).mean())}


def fit(model, x_train, y_train, *, lr: float = 1e-4, epochs: int = 200, batch_size: int = 32,
        seed: int = 0, x_val=None, y_val=None, patience: int = 0, callback=None):
    """Train ``model`` in place; returns the per-epoch history.

    The final optimiser state is left on ``model.adam_state``.

    With ``patience > 0`` training stops once validation Jaccard has not
    improved for that many epochs and the best-validation arrays are
    restored.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    x_train = np.asarray(x_train)
    y_train = np.asarray(y_train, dtype=np.float64)
    n = len(x_train)
    if n < 1:
        raise ValueError("need at least one training row")
    rng = np.random.default_rng([seed, _SHUFFLE_STREAM])
    state = adam_init(model.arrays)
    history = []
    best = (-math.inf, None, 0)
    stale = 0
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss, grads = model.loss_and_grad(x_train[idx], y_train[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            total += loss * len(idx)
            arrays, state = adam_step(model.arrays, grads, state, lr)
            model.set_arrays(arrays)
        record = {"epoch": epoch, "train_loss": total / n}
        if x_val is not None and len(x_val):
            probs = model.predict_proba(x_val)
            record["val_loss"] = bce_loss(probs, y_val)
            record.update({f"val_{k}": v for k, v in quick_scores(probs, y_val).items()})
        history.append(record)
        if callback is not None:
            callback(record)
        log.debug("epoch %d %s", epoch, record)
        if patience and "val_jaccard" in record:
            if record["val_jaccard"] > best[0]:
                best = (record["val_jaccard"], {k: v.copy() for k, v in model.arrays.items()}, epoch)
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
    if patience and best[1] is not None:
        model.set_arrays(best[1])
    model.adam_state = state
    return history
