"""Edge-featured message-passing network with hand-written gradients.

Layout of one forward pass for a batch of patient graphs that share an edge
set (B graphs, M nodes, E directed edges, hidden width d)::

    h0_i   = relu(W_in * v_i + b_in)
    m_e    = relu(W_m [h_src(e) ; w_e] + b_m)            per edge, per layer
    agg_i  = mean of m_e over edges e with dst(e) = i     (zero if none)
    hh_i   = relu(W_u [h_i ; agg_i] + b_u)
    h_i    = hh_i / ||hh_i||  (zero vector when ||hh_i|| = 0)
    z_i    = W_out h_i + b_out                            after the last layer
    probs  = sigmoid(W_read z + b_read)

Sums over edges run in a fixed, canonical (dst, src) order, so results do
not depend on how the edge list was stored.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .encoders import EdgeSet

__all__ = [
    "GNNParams",
    "EdgePlan",
    "ForwardCache",
    "init_params",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "bce_loss",
    "GNNModel",
]

PROB_CLIP = 1e-12


def glorot(rng, fan_out: int, fan_in: int, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(dtype)


@dataclass
class GNNParams:
    """Learnable arrays of the network, keyed in checkpoint order."""

    n_nodes: int
    n_drugs: int
    hidden: int = 128
    layers: int = 2
    arrays: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    activation: str = "relu"

    kind = "gnn"

    @staticmethod
    def names(layers: int) -> list:
        out = ["W_in", "b_in"]
        for k in range(1, layers + 1):
            out += [f"W_m{k}", f"b_m{k}", f"W_u{k}", f"b_u{k}"]
        return out + ["W_out", "b_out", "W_read", "b_read"]

    def shapes(self) -> "OrderedDict[str, tuple]":
        d, m, c = self.hidden, self.n_nodes, self.n_drugs
        s = OrderedDict(W_in=(d, 1), b_in=(d,))
        for k in range(1, self.layers + 1):
            s[f"W_m{k}"] = (d, d + 1)
            s[f"b_m{k}"] = (d,)
            s[f"W_u{k}"] = (d, 2 * d)
            s[f"b_u{k}"] = (d,)
        s["W_out"] = (1, d)
        s["b_out"] = (1,)
        s["W_read"] = (c, m)
        s["b_read"] = (c,)
        return s

    def dims(self) -> dict:
        return {"M": self.n_nodes, "C": self.n_drugs, "d": self.hidden, "K": self.layers}

    def validate(self) -> None:
        for name, shape in self.shapes().items():
            arr = self.arrays.get(name)
            if arr is None:
                raise ValueError(f"missing parameter {name}")
            if arr.shape != shape:
                raise ValueError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"parameter {name} has non-finite entries")

    def copy(self) -> "GNNParams":
        return GNNParams(self.n_nodes, self.n_drugs, self.hidden, self.layers,
                         OrderedDict((k, v.copy()) for k, v in self.arrays.items()),
                         self.activation)

    def zeros_like(self) -> "GNNParams":
        return GNNParams(self.n_nodes, self.n_drugs, self.hidden, self.layers,
                         OrderedDict((k, np.zeros_like(v)) for k, v in self.arrays.items()),
                         self.activation)

    def with_arrays(self, arrays) -> "GNNParams":
        return GNNParams(self.n_nodes, self.n_drugs, self.hidden, self.layers,
                         OrderedDict((k, arrays[k]) for k in self.arrays), self.activation)


def init_params(n_nodes: int, n_drugs: int, hidden: int = 128, layers: int = 2,
                seed: int = 0, dtype=np.float64, zero: bool = False) -> GNNParams:
    """Glorot-uniform weights and zero biases, reproducible from ``seed``."""
    p = GNNParams(n_nodes, n_drugs, hidden, layers)
    rng = np.random.default_rng(seed)
    for name, shape in p.shapes().items():
        if zero or name.startswith("b_"):
            p.arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            p.arrays[name] = glorot(rng, shape[0], shape[1], dtype)
    return p


class EdgePlan:
    """Canonically ordered edges plus the sparse operators used for sums.

    ``mean_op`` (M x E) averages incoming messages per destination node;
    ``src_op`` (M x E) adds per-edge gradients back onto their source node.
    Both sum in ascending edge order.
    """

    def __init__(self, edges: EdgeSet):
        order = np.lexsort((edges.src, edges.dst))
        self.n_nodes = int(edges.n_nodes)
        self.src = np.asarray(edges.src, dtype=np.int64)[order]
        self.dst = np.asarray(edges.dst, dtype=np.int64)[order]
        self.weight = np.asarray(edges.weight, dtype=np.float64)[order]
        self.n_edges = len(self.src)
        if self.n_edges and (self.src == self.dst).any():
            raise ValueError("self-loops are not allowed")
        m, e = self.n_nodes, self.n_edges
        self.in_degree = np.bincount(self.dst, minlength=m)
        inv = np.zeros(m)
        nz = self.in_degree > 0
        inv[nz] = 1.0 / self.in_degree[nz]
        self.inv_degree = inv
        cols = np.arange(e)
        self.mean_op = sp.csr_matrix((inv[self.dst], (self.dst, cols)), shape=(m, e))
        self.src_op = sp.csr_matrix((np.ones(e), (self.src, cols)), shape=(m, e))
        self._typed = {}

    @classmethod
    def of(cls, edges) -> "EdgePlan":
        return edges if isinstance(edges, EdgePlan) else cls(edges)

    def typed(self, dtype):
        """``(mean_op, src_op, weight)`` cast to ``dtype`` (cached)."""
        key = np.dtype(dtype).str
        if key not in self._typed:
            self._typed[key] = (self.mean_op.astype(dtype), self.src_op.astype(dtype),
                                self.weight.astype(dtype))
        return self._typed[key]


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, stored node-major (M x B x ...)."""

    values: np.ndarray              # M x B node values
    pre_in: np.ndarray              # M x B x d
    layer_inputs: list              # h^{k-1}, M x B x d
    msg_masks: list                 # E x B x d booleans (message pre-activation > 0)
    concat: list                    # [h ; agg], M x B x 2d
    pre_update: list                # M x B x d
    norms: list                     # M x B
    outputs: list                   # h^k, M x B x d
    z: np.ndarray                   # B x M
    logits: np.ndarray              # B x C
    probs: np.ndarray               # B x C


def _check_finite(arr, what: str, layer: int) -> None:
    if not np.isfinite(arr).all():
        node = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise FloatingPointError(f"non-finite {what} at layer {layer}, node {node}")


def _mm(x3, w_t):
    """``(M, B, i) @ (i, o)`` through one 2-D BLAS call."""
    m, b, i = x3.shape
    return (x3.reshape(m * b, i) @ w_t).reshape(m, b, -1)


def _outer(g3, x3):
    """Sum over nodes and batch of ``g x^T`` -> ``(o, i)``."""
    return g3.reshape(-1, g3.shape[-1]).T @ x3.reshape(-1, x3.shape[-1])


def forward_batch(values, edges, params: GNNParams):
    """Forward pass for a ``B x M`` matrix of node values sharing ``edges``."""
    plan = EdgePlan.of(edges)
    a = params.arrays
    v = np.asarray(values)
    if v.ndim != 2 or v.shape[1] != params.n_nodes:
        raise ValueError(f"node values have shape {v.shape}, model expects M={params.n_nodes}")
    if plan.n_nodes != params.n_nodes:
        raise ValueError(f"edge set spans {plan.n_nodes} nodes, model expects {params.n_nodes}")
    dtype = a["W_in"].dtype
    mean_op, _, w_edge = plan.typed(dtype)
    vt = np.ascontiguousarray(v.T, dtype=dtype)               # M x B
    M, B = vt.shape
    d = params.hidden

    pre_in = vt[:, :, None] * a["W_in"][:, 0] + a["b_in"]
    h = np.maximum(pre_in, 0.0)
    cache = ForwardCache(vt, pre_in, [], [], [], [], [], [], None, None, None)
    for k in range(1, params.layers + 1):
        W_m, b_m = a[f"W_m{k}"], a[f"b_m{k}"]
        W_u, b_u = a[f"W_u{k}"], a[f"b_u{k}"]
        if plan.n_edges:
            proj = _mm(h, W_m[:, :d].T)
            pre_m = proj[plan.src] + (w_edge[:, None, None] * W_m[:, d] + b_m)
            mask = pre_m > 0
            pre_m *= mask
            agg = (mean_op @ pre_m.reshape(plan.n_edges, B * d)).reshape(M, B, d)
        else:
            mask = np.zeros((0, B, d), dtype=bool)
            agg = np.zeros((M, B, d), dtype=dtype)
        cat = np.concatenate([h, agg], axis=2)
        pre_u = _mm(cat, W_u.T) + b_u
        hh = np.maximum(pre_u, 0.0)
        norm = np.sqrt((hh * hh).sum(axis=2))
        safe = np.where(norm > 0, norm, 1.0)
        h_new = hh / safe[:, :, None]
        _check_finite(h_new, "node feature", k)
        cache.layer_inputs.append(h)
        cache.msg_masks.append(mask)
        cache.concat.append(cat)
        cache.pre_update.append(pre_u)
        cache.norms.append(norm)
        cache.outputs.append(h_new)
        h = h_new

    z = np.ascontiguousarray((h @ a["W_out"][0] + a["b_out"][0]).T)   # B x M
    logits = z @ a["W_read"].T + a["b_read"]
    _check_finite(logits.T, "readout logit", params.layers + 1)
    probs = expit(logits)
    cache.z, cache.logits, cache.probs = z, logits, probs
    return probs, cache


def bce_loss(probs, labels) -> float:
    """Binary cross-entropy averaged over drugs (and over rows for 2-D input)."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"probs {p.shape} and labels {y.shape} differ in shape")
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def backward_batch(edges, params: GNNParams, cache: ForwardCache, labels,
                   weights=None) -> "OrderedDict":
    """Gradients of the batch-mean BCE w.r.t. every parameter array.

    ``weights`` gives each row a multiplicity (rows standing for several
    identical graphs, with ``labels`` their mean label); the mean is then
    taken over ``weights.sum()`` rows.
    """
    plan = EdgePlan.of(edges)
    a = params.arrays
    y = np.asarray(labels)
    if y.shape != cache.probs.shape:
        raise ValueError(f"labels {y.shape} do not match outputs {cache.probs.shape}")
    B, C = y.shape
    M = plan.n_nodes
    d = params.hidden
    dtype = a["W_in"].dtype
    _, src_op, w_edge = plan.typed(dtype)
    g = OrderedDict((name, None) for name in a)

    if weights is None:
        dlogits = ((cache.probs - y) / (B * C)).astype(dtype)
    else:
        w = np.asarray(weights, dtype=np.float64)
        dlogits = (w[:, None] * (cache.probs - y) / (w.sum() * C)).astype(dtype)
    g["W_read"] = dlogits.T @ cache.z
    g["b_read"] = dlogits.sum(axis=0)
    dz = np.ascontiguousarray((dlogits @ a["W_read"]).T)            # M x B
    h_last = cache.outputs[-1]
    g["W_out"] = (dz.reshape(1, -1) @ h_last.reshape(-1, d))
    g["b_out"] = np.array([dz.sum()], dtype=dtype)
    dh = dz[:, :, None] * a["W_out"][0]

    for k in range(params.layers, 0, -1):
        i = k - 1
        h_out, norm = cache.outputs[i], cache.norms[i]
        # d(hh/|hh|) = (I - h h^T) / |hh|; h_out is zero where |hh| = 0
        radial = (h_out * dh).sum(axis=2)
        safe = np.where(norm > 0, norm, 1.0)
        dhh = (dh - h_out * radial[:, :, None]) / safe[:, :, None]
        dhh *= (norm > 0)[:, :, None]
        dpre_u = dhh * (cache.pre_update[i] > 0)
        W_u, W_m = a[f"W_u{k}"], a[f"W_m{k}"]
        g[f"W_u{k}"] = _outer(dpre_u, cache.concat[i])
        g[f"b_u{k}"] = dpre_u.sum(axis=(0, 1))
        dcat = _mm(dpre_u, W_u)
        dh_prev = dcat[:, :, :d]
        dagg = dcat[:, :, d:]
        h_in = cache.layer_inputs[i]
        if plan.n_edges:
            dpre_m = dagg[plan.dst] * plan.inv_degree[plan.dst].astype(dtype)[:, None, None]
            dpre_m *= cache.msg_masks[i]
            dproj = (src_op @ dpre_m.reshape(plan.n_edges, B * d)).reshape(M, B, d)
            gWm = np.empty_like(W_m)
            gWm[:, :d] = _outer(dproj, h_in)
            gWm[:, d] = w_edge @ dpre_m.reshape(plan.n_edges, B * d).reshape(plan.n_edges, B, d).sum(axis=1)
            g[f"W_m{k}"] = gWm
            g[f"b_m{k}"] = dpre_m.sum(axis=(0, 1))
            dh_prev = dh_prev + _mm(dproj, W_m[:, :d])
        else:
            g[f"W_m{k}"] = np.zeros_like(W_m)
            g[f"b_m{k}"] = np.zeros_like(a[f"b_m{k}"])
        dh = dh_prev

    dpre_in = dh * (cache.pre_in > 0)
    g["W_in"] = (cache.values.reshape(1, -1) @ dpre_in.reshape(-1, d)).T
    g["b_in"] = dpre_in.sum(axis=(0, 1))
    return g


def forward(graph, params: GNNParams, edges=None):
    """Single-graph forward; returns ``(probs[C], cache)``."""
    probs, cache = forward_batch(np.asarray(graph.node_values)[None, :],
                                 edges if edges is not None else graph.edges, params)
    return probs[0], cache


def backward(graph, params: GNNParams, cache: ForwardCache, labels, edges=None):
    return backward_batch(edges if edges is not None else graph.edges, params, cache,
                          np.asarray(labels, dtype=np.float64)[None, :])


class GNNModel:
    """Binds parameters to the shared edge set for training and inference."""

    kind = "gnn"

    def __init__(self, params: GNNParams, edges):
        self.params = params
        self.plan = EdgePlan.of(edges)

    @property
    def arrays(self):
        return self.params.arrays

    def set_arrays(self, arrays) -> None:
        self.params = self.params.with_arrays(arrays)

    def loss_and_grad(self, x, y):
        """Batch-mean BCE and its gradient.

        Identical graphs in the batch are evaluated once; their gradient
        contributions are combined through multiplicity weights.
        """
        x = np.asarray(x)
        y = np.asarray(y, dtype=np.float64)
        uniq, inverse, counts = np.unique(x, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        probs, cache = forward_batch(uniq, self.plan, self.params)
        loss = bce_loss(probs[inverse], y)
        y_mean = np.zeros((len(uniq), y.shape[1]))
        np.add.at(y_mean, inverse, y)
        y_mean /= counts[:, None]
        grads = backward_batch(self.plan, self.params, cache, y_mean, weights=counts)
        return loss, grads

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x)
        if len(x) == 0:
            return np.zeros((0, self.params.n_drugs))
        uniq, inverse = np.unique(x, axis=0, return_inverse=True)
        out = [forward_batch(uniq[s:s + batch_size], self.plan, self.params)[0]
               for s in range(0, len(uniq), batch_size)]
        return np.concatenate(out)[inverse.reshape(-1)]

    def node_outputs(self, x) -> np.ndarray:
        """Final-layer per-node scalars ``z`` (B x M)."""
        return forward_batch(np.asarray(x), self.plan, self.params)[1].z

    def meta(self) -> dict:
        return {"dims": self.params.dims(), "activation": self.params.activation}
