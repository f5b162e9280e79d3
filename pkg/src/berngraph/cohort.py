"""Sparse binary cohorts: the data model, on-disk format and splitting.

A cohort is stored as a JSON manifest next to two CSV coordinate files
(``row,col`` header, one stored 1-entry per line).  Absent coordinates are
zeros, so no value column is written.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ._io import atomic_write_json, atomic_write_text

__all__ = [
    "CohortError",
    "EventCohort",
    "DatasetSplit",
    "load_cohort",
    "save_cohort",
    "read_triplets",
    "split",
    "allocate_sizes",
    "sparsity",
]


class CohortError(ValueError):
    """Raised for malformed cohort files or inconsistent cohort contents."""


def _binary_csr(rows, cols, shape) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    data = np.ones(len(rows), dtype=np.uint8)
    mat = sp.csr_matrix((data, (rows, cols)), shape=shape, dtype=np.uint8)
    mat.sort_indices()
    return mat


def _check_binary(mat: sp.csr_matrix, what: str) -> None:
    mat.sum_duplicates()
    if mat.nnz and (mat.data != 1).any():
        raise CohortError(f"{what}: stored values must all be 1 (duplicate or non-binary entries)")


@dataclass(frozen=True)
class EventCohort:
    """Patients x events indicator matrix with a patients x drugs label matrix."""

    events: sp.csr_matrix
    labels: sp.csr_matrix
    event_names: tuple
    drug_names: tuple
    group_ids: Optional[tuple] = None

    def __post_init__(self):
        events = sp.csr_matrix(self.events, dtype=np.uint8)
        labels = sp.csr_matrix(self.labels, dtype=np.uint8)
        _check_binary(events, "events")
        _check_binary(labels, "labels")
        events.sort_indices()
        labels.sort_indices()
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "event_names", tuple(str(n) for n in self.event_names))
        object.__setattr__(self, "drug_names", tuple(str(n) for n in self.drug_names))
        if events.shape[0] != labels.shape[0]:
            raise CohortError(
                f"events has {events.shape[0]} rows but labels has {labels.shape[0]}"
            )
        if len(self.event_names) != events.shape[1]:
            raise CohortError(
                f"{len(self.event_names)} event names for {events.shape[1]} event columns"
            )
        if len(self.drug_names) != labels.shape[1]:
            raise CohortError(
                f"{len(self.drug_names)} drug names for {labels.shape[1]} label columns"
            )
        if self.group_ids is not None:
            groups = tuple(self.group_ids)
            if len(groups) != events.shape[0]:
                raise CohortError(f"{len(groups)} group ids for {events.shape[0]} patients")
            object.__setattr__(self, "group_ids", groups)

    @property
    def n_patients(self) -> int:
        return self.events.shape[0]

    @property
    def n_events(self) -> int:
        return self.events.shape[1]

    @property
    def n_drugs(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def from_dense(cls, events, labels, event_names=None, drug_names=None, group_ids=None):
        events = np.asarray(events)
        labels = np.asarray(labels)
        if events.ndim != 2 or labels.ndim != 2:
            raise CohortError("events and labels must be 2-D")
        if not np.isin(events, (0, 1)).all() or not np.isin(labels, (0, 1)).all():
            raise CohortError("dense matrices must contain only 0 and 1")
        if event_names is None:
            event_names = [f"e{j}" for j in range(events.shape[1])]
        if drug_names is None:
            drug_names = [f"d{c}" for c in range(labels.shape[1])]
        return cls(
            sp.csr_matrix(events.astype(np.uint8)),
            sp.csr_matrix(labels.astype(np.uint8)),
            tuple(event_names),
            tuple(drug_names),
            None if group_ids is None else tuple(group_ids),
        )

    def event_rows(self, rows=None) -> np.ndarray:
        """Dense 0/1 event matrix (float64) for ``rows`` (all rows by default)."""
        mat = self.events if rows is None else self.events[np.asarray(rows, dtype=np.int64)]
        return mat.toarray().astype(np.float64)

    def label_rows(self, rows=None) -> np.ndarray:
        mat = self.labels if rows is None else self.labels[np.asarray(rows, dtype=np.int64)]
        return mat.toarray().astype(np.float64)


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------


def read_triplets(path, n_rows: int, n_cols: int) -> sp.csr_matrix:
    """Parse a ``row,col`` coordinate file into a binary CSR matrix.

    Every problem is reported with the file name, line number and the
    offending coordinate.
    """
    path = Path(path)
    rows, cols = [], []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CohortError(f"{path}: empty file, expected header 'row,col'")
        if [h.strip() for h in header[:2]] != ["row", "col"]:
            raise CohortError(f"{path}:1: expected header 'row,col', got {','.join(header)!r}")
        if len(header) > 2:
            if [h.strip() for h in header] != ["row", "col", "value"]:
                raise CohortError(f"{path}:1: unexpected columns {header!r}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                r, c = int(rec[0]), int(rec[1])
            except (ValueError, IndexError):
                raise CohortError(f"{path}:{lineno}: cannot parse coordinate {rec!r}") from None
            if len(rec) > 2:
                try:
                    value = float(rec[2])
                except ValueError:
                    raise CohortError(f"{path}:{lineno}: cannot parse value {rec[2]!r}") from None
                if value != 1:
                    raise CohortError(
                        f"{path}:{lineno}: value {rec[2]} at ({r},{c}) is not 1; "
                        "only stored ones are allowed"
                    )
            if not (0 <= r < n_rows and 0 <= c < n_cols):
                raise CohortError(
                    f"{path}:{lineno}: coordinate ({r},{c}) out of range for shape ({n_rows},{n_cols})"
                )
            if (r, c) in seen:
                raise CohortError(f"{path}:{lineno}: duplicate coordinate ({r},{c})")
            seen.add((r, c))
            rows.append(r)
            cols.append(c)
    return _binary_csr(rows, cols, (n_rows, n_cols))


def _triplet_text(mat: sp.csr_matrix) -> str:
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    buf = io.StringIO()
    buf.write("row,col\n")
    for r, c in zip(coo.row[order], coo.col[order]):
        buf.write(f"{r},{c}\n")
    return buf.getvalue()


def load_cohort(manifest_path) -> EventCohort:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CohortError(f"{manifest_path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise CohortError(f"{manifest_path}: invalid JSON ({exc})") from None
    required = ("n_patients", "n_events", "n_drugs", "event_names", "drug_names",
                "events_file", "labels_file")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise CohortError(f"{manifest_path}: missing manifest fields {missing}")
    n, m, c = (int(manifest[k]) for k in ("n_patients", "n_events", "n_drugs"))
    if len(manifest["event_names"]) != m:
        raise CohortError(
            f"{manifest_path}: n_events={m} but {len(manifest['event_names'])} event_names"
        )
    if len(manifest["drug_names"]) != c:
        raise CohortError(
            f"{manifest_path}: n_drugs={c} but {len(manifest['drug_names'])} drug_names"
        )
    base = manifest_path.parent
    events_file = base / manifest["events_file"]
    labels_file = base / manifest["labels_file"]
    for f in (events_file, labels_file):
        if not f.exists():
            raise CohortError(f"{manifest_path}: referenced file {f} not found")
    events = read_triplets(events_file, n, m)
    labels = read_triplets(labels_file, n, c)
    groups = manifest.get("group_ids")
    if groups is not None and len(groups) != n:
        raise CohortError(f"{manifest_path}: n_patients={n} but {len(groups)} group_ids")
    return EventCohort(events, labels, tuple(manifest["event_names"]),
                       tuple(manifest["drug_names"]),
                       None if groups is None else tuple(groups))


def save_cohort(cohort: EventCohort, manifest_path) -> Path:
    """Write ``cohort`` as ``<stem>.json`` plus ``<stem>_events.csv`` / ``<stem>_labels.csv``."""
    manifest_path = Path(manifest_path)
    stem = manifest_path.stem
    events_name = f"{stem}_events.csv"
    labels_name = f"{stem}_labels.csv"
    atomic_write_text(manifest_path.parent / events_name, _triplet_text(cohort.events))
    atomic_write_text(manifest_path.parent / labels_name, _triplet_text(cohort.labels))
    manifest = {
        "n_patients": cohort.n_patients,
        "n_events": cohort.n_events,
        "n_drugs": cohort.n_drugs,
        "event_names": list(cohort.event_names),
        "drug_names": list(cohort.drug_names),
        "events_file": events_name,
        "labels_file": labels_name,
    }
    if cohort.group_ids is not None:
        manifest["group_ids"] = list(cohort.group_ids)
    atomic_write_json(manifest_path, manifest)
    return manifest_path


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSplit:
    train_rows: tuple
    val_rows: tuple
    test_rows: tuple
    seed: int
    ratios: tuple = field(default=(0.6, 0.2, 0.2))

    def sizes(self):
        return len(self.train_rows), len(self.val_rows), len(self.test_rows)


def allocate_sizes(n: int, ratios: Sequence[float]) -> list:
    """Largest-remainder apportionment of ``n`` items over ``ratios``.

    Seats that cannot be handed out because several parts tie on the same
    remainder go to the first part (train).
    """
    fracs = [Fraction(r).limit_denominator(10**9) for r in ratios]
    total = sum(fracs)
    quotas = [f / total * n for f in fracs]
    sizes = [int(q) for q in quotas]  # floor, quotas are non-negative
    rems = [q - s for q, s in zip(quotas, sizes)]
    leftover = n - sum(sizes)
    bumped = set()
    while leftover > 0:
        open_parts = [i for i in range(len(sizes)) if i not in bumped]
        if not open_parts:
            sizes[0] += leftover
            break
        top = max(rems[i] for i in open_parts)
        tied = [i for i in open_parts if rems[i] == top]
        if len(tied) <= leftover:
            for i in tied:
                sizes[i] += 1
                bumped.add(i)
            leftover -= len(tied)
        else:
            sizes[0] += leftover
            leftover = 0
    return sizes


def split(cohort: EventCohort, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> DatasetSplit:
    """Deterministic train/validation/test partition of the cohort rows.

    When the cohort carries ``group_ids`` whole groups are assigned, so no
    group straddles two partitions; the ratios then apply to group counts.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError(f"expected three ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    n = cohort.n_patients

    if cohort.group_ids is None:
        sizes = allocate_sizes(n, ratios)
        if min(sizes) < 1:
            raise CohortError(f"N={n} is too small to populate all three partitions")
        perm = rng.permutation(n)
        a, b = sizes[0], sizes[0] + sizes[1]
        parts = (perm[:a], perm[a:b], perm[b:])
    else:
        groups = cohort.group_ids
        order = list(dict.fromkeys(groups))
        sizes = allocate_sizes(len(order), ratios)
        if min(sizes) < 1:
            raise CohortError(
                f"{len(order)} groups are too few to populate all three partitions"
            )
        perm = rng.permutation(len(order))
        where = {}
        for pos, gi in enumerate(perm):
            where[order[gi]] = 0 if pos < sizes[0] else (1 if pos < sizes[0] + sizes[1] else 2)
        buckets = ([], [], [])
        for row, g in enumerate(groups):
            buckets[where[g]].append(row)
        parts = buckets

    train, val, test = (tuple(sorted(int(i) for i in p)) for p in parts)
    return DatasetSplit(train, val, test, int(seed), ratios)


def sparsity(matrix) -> float:
    """Fraction of zero entries, ``1 - nnz / (rows * cols)``."""
    rows, cols = matrix.shape
    total = rows * cols
    if total == 0:
        raise ValueError(f"sparsity undefined for an empty {rows}x{cols} matrix")
    if sp.issparse(matrix):
        m = sp.csr_matrix(matrix)
        m.eliminate_zeros()
        nnz = m.nnz
    else:
        nnz = int(np.count_nonzero(matrix))
    return 1.0 - nnz / total
