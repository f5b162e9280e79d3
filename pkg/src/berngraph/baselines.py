"""Reference baselines sharing the GNN's loss, optimiser and prediction path.

* one-vs-rest logistic regression: ``probs = sigmoid(x W^T + b)``
* two-layer MLP: ``probs = sigmoid(relu(x W1^T + b1) W2^T + b2)``
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from scipy.special import expit

from .gnn import bce_loss, glorot
from .metrics import predictions_from_probs
from .trainer import fit

__all__ = [
    "LinearModel",
    "MlpModel",
    "init_linear",
    "init_mlp",
    "train_lr",
    "train_mlp",
    "predict_baseline",
    "MLP_HIDDEN",
]

MLP_HIDDEN = 64


class LinearModel:
    kind = "lr"

    def __init__(self, arrays, l2: float = 0.0):
        self.arrays = OrderedDict(arrays)
        self.l2 = float(l2)

    @property
    def n_inputs(self) -> int:
        return self.arrays["W"].shape[1]

    def set_arrays(self, arrays) -> None:
        self.arrays = OrderedDict((k, arrays[k]) for k in self.arrays)

    def _check(self, x):
        x = np.asarray(x, dtype=self.arrays["W"].dtype)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ValueError(f"rows have shape {x.shape}, model expects {self.n_inputs} features")
        return x

    def predict_proba(self, x) -> np.ndarray:
        x = self._check(x)
        return expit(x @ self.arrays["W"].T + self.arrays["b"])

    def loss_and_grad(self, x, y):
        x = self._check(x)
        y = np.asarray(y, dtype=np.float64)
        probs = expit(x @ self.arrays["W"].T + self.arrays["b"])
        B, C = y.shape
        dlogits = (probs - y) / (B * C)
        loss = bce_loss(probs, y)
        gW = dlogits.T @ x
        if self.l2:
            loss += 0.5 * self.l2 * float(np.sum(self.arrays["W"] ** 2))
            gW = gW + self.l2 * self.arrays["W"]
        return loss, OrderedDict(W=gW, b=dlogits.sum(axis=0))

    def meta(self) -> dict:
        C, M = self.arrays["W"].shape
        return {"dims": {"M": M, "C": C}, "l2": self.l2}


class MlpModel:
    kind = "mlp"

    def __init__(self, arrays):
        self.arrays = OrderedDict(arrays)

    @property
    def n_inputs(self) -> int:
        return self.arrays["W1"].shape[1]

    def set_arrays(self, arrays) -> None:
        self.arrays = OrderedDict((k, arrays[k]) for k in self.arrays)

    def _forward(self, x):
        x = np.asarray(x, dtype=self.arrays["W1"].dtype)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ValueError(f"rows have shape {x.shape}, model expects {self.n_inputs} features")
        pre = x @ self.arrays["W1"].T + self.arrays["b1"]
        hid = np.maximum(pre, 0.0)
        probs = expit(hid @ self.arrays["W2"].T + self.arrays["b2"])
        return x, pre, hid, probs

    def predict_proba(self, x) -> np.ndarray:
        return self._forward(x)[3]

    def loss_and_grad(self, x, y):
        x, pre, hid, probs = self._forward(x)
        y = np.asarray(y, dtype=np.float64)
        B, C = y.shape
        dlogits = (probs - y) / (B * C)
        dhid = dlogits @ self.arrays["W2"]
        dpre = np.where(pre > 0, dhid, 0.0)
        grads = OrderedDict(
            W1=dpre.T @ x,
            b1=dpre.sum(axis=0),
            W2=dlogits.T @ hid,
            b2=dlogits.sum(axis=0),
        )
        return bce_loss(probs, y), grads

    def meta(self) -> dict:
        H, M = self.arrays["W1"].shape
        return {"dims": {"M": M, "C": self.arrays["W2"].shape[0], "H": H}}


def init_linear(n_inputs: int, n_drugs: int, dtype=np.float64, l2: float = 0.0) -> LinearModel:
    """Zero-initialised logistic regression (the loss is convex)."""
    return LinearModel(OrderedDict(W=np.zeros((n_drugs, n_inputs), dtype=dtype),
                                   b=np.zeros(n_drugs, dtype=dtype)), l2=l2)


def init_mlp(n_inputs: int, n_drugs: int, hidden: int = MLP_HIDDEN, seed: int = 0,
             dtype=np.float64) -> MlpModel:
    rng = np.random.default_rng(seed)
    return MlpModel(OrderedDict(
        W1=glorot(rng, hidden, n_inputs, dtype),
        b1=np.zeros(hidden, dtype=dtype),
        W2=glorot(rng, n_drugs, hidden, dtype),
        b2=np.zeros(n_drugs, dtype=dtype),
    ))


def train_lr(x, y, lr: float = 1e-4, epochs: int = 200, batch_size: int = 32, seed: int = 0,
             l2: float = 0.0, x_val=None, y_val=None, patience: int = 0, dtype=np.float64):
    """Fit one-vs-rest logistic regression; returns ``(model, history)``."""
    x = np.asarray(x, dtype=dtype)
    model = init_linear(x.shape[1], np.asarray(y).shape[1], dtype=dtype, l2=l2)
    history = fit(model, x, y, lr=lr, epochs=epochs, batch_size=batch_size, seed=seed,
                  x_val=x_val, y_val=y_val, patience=patience)
    return model, history


def train_mlp(x, y, lr: float = 1e-4, epochs: int = 200, batch_size: int = 32, seed: int = 0,
              hidden: int = MLP_HIDDEN, x_val=None, y_val=None, patience: int = 0,
              dtype=np.float64):
    """Fit the 64-unit MLP; returns ``(model, history)``."""
    x = np.asarray(x, dtype=dtype)
    model = init_mlp(x.shape[1], np.asarray(y).shape[1], hidden=hidden, seed=seed, dtype=dtype)
    history = fit(model, x, y, lr=lr, epochs=epochs, batch_size=batch_size, seed=seed,
                  x_val=x_val, y_val=y_val, patience=patience)
    return model, history


def predict_baseline(model, rows) -> list:
    return predictions_from_probs(model.predict_proba(rows))
