"""Shared small fixtures for the network tests and the acceptance run."""

import numpy as np

from berngraph.encoders import EdgeSet
from berngraph.gnn import bce_loss, backward_batch, forward_batch, init_params

FD_STEP = 1e-5


def random_edges(rng, m, p=0.4, weights=None):
    src, dst = [], []
    for i in range(m):
        for j in range(m):
            if i != j and rng.random() < p:
                src.append(j)
                dst.append(i)
    w = rng.random(len(src)) if weights is None else weights
    return EdgeSet(m, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), w, "post")


def gnn_fixture(seed, m=6, c=3, d=8, k=2, b=4):
    """Random edges, perturbed Glorot params, node values in [0,1) and labels."""
    rng = np.random.default_rng(seed)
    edges = random_edges(rng, m)
    params = init_params(m, c, d, k, seed=seed)
    for name in params.arrays:
        params.arrays[name] = params.arrays[name] + rng.normal(0.0, 0.3, params.arrays[name].shape)
    values = rng.random((b, m))
    labels = (rng.random((b, c)) < 0.5).astype(float)
    return edges, params, values, labels


def finite_difference_error(edges, params, values, labels, step=FD_STEP):
    """Worst ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`` over all entries."""
    _, cache = forward_batch(values, edges, params)
    grads = backward_batch(edges, params, cache, labels)
    worst = 0.0
    for name, arr in params.arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            up = bce_loss(forward_batch(values, edges, params)[0], labels)
            arr[idx] = old - step
            down = bce_loss(forward_batch(values, edges, params)[0], labels)
            arr[idx] = old
            numeric = (up - down) / (2 * step)
            analytic = grads[name][idx]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, err)
    return worst


def max_norm_deviation(cache):
    """Largest | ||h|| - 1 | over nonzero updated node features, all layers."""
    worst = 0.0
    for h in cache.outputs:
        norms = np.linalg.norm(h, axis=2)
        nz = norms > 0
        if nz.any():
            worst = max(worst, float(np.abs(norms[nz] - 1.0).max()))
    return worst


# 20-row metric fixture built from five hand-checked row patterns
# (probs, truth, jaccard, f1, prauc, auroc, n_recommended)
METRIC_PATTERNS = {
    "A": ((0.9, 0.8, 0.1), (1, 0, 0), 1 / 2, 2 / 3, 1.0, 1.0, 2),
    "B": ((0.2, 0.6, 0.7), (1, 1, 0), 1 / 3, 1 / 2, 7 / 12, 0.0, 2),
    "C": ((0.3, 0.3, 0.3), (0, 1, 0), 0.0, 0.0, 1 / 3, 0.5, 0),
    "D": ((0.4, 0.1, 0.2), (0, 0, 0), 1.0, 1.0, None, None, 0),
    "E": ((0.55, 0.95, 0.5), (1, 1, 1), 2 / 3, 4 / 5, 1.0, None, 2),
}
METRIC_ORDER = "AABCDEABCDAEBCDABCDE"
# sums over the 20 rows, worked by hand:
#   jaccard  (5/2 + 4/3 + 0 + 4 + 2) / 20        = 59/120
#   f1       (10/3 + 2 + 0 + 4 + 12/5) / 20      = 44/75
#   prauc    (5 + 7/3 + 4/3 + 3) / 16 rows       = 35/48   (D rows skipped)
#   auroc    (5 + 0 + 2) / 13 rows               = 7/13    (D and E skipped)
#   avg_drug 24 / 20                             = 6/5
METRIC_EXPECTED = {"jaccard": 59 / 120, "f1": 44 / 75, "prauc": 35 / 48, "auroc": 7 / 13,
                   "avg_drug": 6 / 5}
METRIC_SKIPPED = {"jaccard": 0, "f1": 0, "prauc": 4, "auroc": 7, "avg_drug": 0}


def metric_fixture():
    probs = np.array([METRIC_PATTERNS[c][0] for c in METRIC_ORDER], dtype=float)
    truth = np.array([METRIC_PATTERNS[c][1] for c in METRIC_ORDER], dtype=float)
    return probs, truth


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"criterion {criterion}: {status} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
