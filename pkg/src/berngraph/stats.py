"""Empirical Bernoulli statistics of a binary event matrix.

Marginals are the column means of the (training) rows.  Pairwise joint
counts are gathered row by row: each row contributes one increment for every
pair inside its nonzero set, so the cost is ``sum(nnz(row)**2)`` rather than
``M**2`` per row.  Conditionals ``P(E_i=1 | E_j=1)`` follow from the two.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._io import atomic_write_json, atomic_write_text

__all__ = [
    "BernoulliStats",
    "estimate_marginals",
    "joint_counts",
    "conditionals",
    "compute_stats",
    "write_stats",
]


def _as_csr(events, rows=None) -> sp.csr_matrix:
    mat = sp.csr_matrix(events) if not sp.isspmatrix_csr(events) else events
    if rows is not None:
        mat = mat[np.asarray(rows, dtype=np.int64)]
    mat = mat.copy()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


@dataclass(frozen=True)
class BernoulliStats:
    """Frozen marginal, joint and conditional tables.

    ``pair_i < pair_j`` index the symmetric joint table; ``cond_i``,
    ``cond_j`` hold both orientations of every stored pair with
    ``cond_value = P(E_i=1 | E_j=1) = joint / event_counts[j]``.
    """

    n_rows: int
    event_counts: np.ndarray
    marginals: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_joint: np.ndarray
    cond_i: np.ndarray
    cond_j: np.ndarray
    cond_joint: np.ndarray
    cond_value: np.ndarray

    @property
    def n_events(self) -> int:
        return len(self.event_counts)

    def joint(self, i: int, j: int) -> int:
        """Rows with both events set; 0 for pairs that never co-occur."""
        if i == j:
            return int(self.event_counts[i])
        a, b = (i, j) if i < j else (j, i)
        key = a * self.n_events + b
        keys = self.pair_i * self.n_events + self.pair_j
        pos = np.searchsorted(keys, key)
        if pos < len(keys) and keys[pos] == key:
            return int(self.pair_joint[pos])
        return 0

    def conditional(self, i: int, j: int):
        """``P(E_i=1 | E_j=1)`` or ``None`` when the pair is not stored."""
        keys = self.cond_i * self.n_events + self.cond_j
        key = i * self.n_events + j
        pos = np.searchsorted(keys, key)
        if pos < len(keys) and keys[pos] == key:
            return float(self.cond_value[pos])
        return None

    def joint_matrix(self) -> np.ndarray:
        """Dense symmetric joint-count matrix with zero diagonal (small M only)."""
        m = self.n_events
        out = np.zeros((m, m), dtype=np.int64)
        out[self.pair_i, self.pair_j] = self.pair_joint
        out[self.pair_j, self.pair_i] = self.pair_joint
        return out


def estimate_marginals(events, rows=None):
    """Column counts and Bernoulli means.

    Returns ``(event_counts, marginals, n_rows)``; the probability of an
    event being absent is ``1 - marginals``.
    """
    mat = _as_csr(events, rows)
    n_rows = mat.shape[0]
    if n_rows < 1:
        raise ValueError("cannot estimate marginals from zero rows")
    counts = np.bincount(mat.indices, minlength=mat.shape[1]).astype(np.int64)
    return counts, counts / float(n_rows), n_rows


def _count_shard(indptr, indices, n_events, start, stop):
    chunks = []
    for r in range(start, stop):
        cols = indices[indptr[r]:indptr[r + 1]]
        k = len(cols)
        if k < 2:
            continue
        a, b = np.triu_indices(k, 1)
        chunks.append(cols[a] * n_events + cols[b])
    if not chunks:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    keys, counts = np.unique(np.concatenate(chunks), return_counts=True)
    return keys, counts.astype(np.int64)


def joint_counts(events, rows=None, threads: int = 1):
    """Pairwise co-occurrence counts for pairs seen together at least once.

    Returns ``(pair_i, pair_j, counts)`` with ``pair_i < pair_j`` sorted
    lexicographically.  With ``threads > 1`` rows are sharded and the
    per-shard tables merged by integer addition.
    """
    mat = _as_csr(events, rows)
    n, m = mat.shape
    indptr = mat.indptr
    indices = mat.indices.astype(np.int64)
    threads = max(1, int(threads))
    bounds = np.linspace(0, n, min(threads, max(n, 1)) + 1).astype(int)
    shards = list(zip(bounds[:-1], bounds[1:]))
    if len(shards) == 1:
        results = [_count_shard(indptr, indices, m, 0, n)]
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            results = list(pool.map(lambda s: _count_shard(indptr, indices, m, *s), shards))
    all_keys = np.concatenate([k for k, _ in results]) if results else np.empty(0, np.int64)
    all_counts = np.concatenate([c for _, c in results]) if results else np.empty(0, np.int64)
    keys, inverse = np.unique(all_keys, return_inverse=True)
    counts = np.zeros(len(keys), dtype=np.int64)
    np.add.at(counts, inverse, all_counts)
    return keys // m, keys % m, counts


def conditionals(pair_i, pair_j, pair_joint, event_counts):
    """Directed conditional table for both orientations of each stored pair.

    Returns ``(i, j, joint, value)`` sorted by ``(i, j)`` where
    ``value = joint / event_counts[j]``.
    """
    pair_i = np.asarray(pair_i, dtype=np.int64)
    pair_j = np.asarray(pair_j, dtype=np.int64)
    pair_joint = np.asarray(pair_joint, dtype=np.int64)
    event_counts = np.asarray(event_counts, dtype=np.int64)
    ci = np.concatenate([pair_i, pair_j])
    cj = np.concatenate([pair_j, pair_i])
    joint = np.concatenate([pair_joint, pair_joint])
    order = np.lexsort((cj, ci))
    ci, cj, joint = ci[order], cj[order], joint[order]
    value = joint / event_counts[cj].astype(np.float64)
    return ci, cj, joint, value


def compute_stats(events, rows=None, threads: int = 1) -> BernoulliStats:
    """All Bernoulli tables for ``events`` restricted to ``rows``."""
    counts, marginals, n_rows = estimate_marginals(events, rows)
    pi, pj, pc = joint_counts(events, rows, threads=threads)
    ci, cj, cjoint, cval = conditionals(pi, pj, pc, counts)
    return BernoulliStats(n_rows, counts, marginals, pi, pj, pc, ci, cj, cjoint, cval)


def write_stats(stats: BernoulliStats, out_dir, event_names=None) -> dict:
    """Write ``stats.json`` plus ``marginals.csv`` and ``conditionals.csv``."""
    out_dir = Path(out_dir)
    lines = ["event,count,rho"]
    for j in range(stats.n_events):
        lines.append(f"{j},{int(stats.event_counts[j])},{float(stats.marginals[j])!r}")
    atomic_write_text(out_dir / "marginals.csv", "\n".join(lines) + "\n")
    lines = ["i,j,joint,e_ij"]
    for i, j, k, e in zip(stats.cond_i, stats.cond_j, stats.cond_joint, stats.cond_value):
        lines.append(f"{int(i)},{int(j)},{int(k)},{float(e)!r}")
    atomic_write_text(out_dir / "conditionals.csv", "\n".join(lines) + "\n")
    header = {
        "n_rows": stats.n_rows,
        "M": stats.n_events,
        "n_pairs": int(len(stats.pair_joint)),
        "marginals_file": "marginals.csv",
        "conditionals_file": "conditionals.csv",
    }
    if event_names is not None:
        header["event_names"] = list(event_names)
    atomic_write_json(out_dir / "stats.json", header)
    return header
