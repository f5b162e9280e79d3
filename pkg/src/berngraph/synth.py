"""Synthetic cohorts with planted noisy-OR event structure and rule labels.

Each patient independently switches on latent causes.  An active cause fires
each event it loads with that loading's activation probability; every event
also fires on its own at a background rate.  Drug labels are any-of / all-of
rules over event subsets, flipped independently with probability
``label_noise``.  Every patient draws from its own generator keyed by
``(seed, patient)``, so the cohort does not depend on generation order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_json
from .cohort import EventCohort

__all__ = [
    "SynthConfig",
    "GroundTruth",
    "make_config",
    "generate",
    "expected_event_rates",
    "brute_force_stats",
    "write_ground_truth",
]


@dataclass
class SynthConfig:
    n_patients: int
    n_events: int
    n_drugs: int
    n_causes: int
    cause_prevalence: list            # per cause
    loading: list                     # per cause: list of [event, activation_prob]
    background_rate: list             # per event
    rules: list                       # per drug: {"events": [...], "type": "any"|"all"}
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_patients", "n_events", "n_drugs", "n_causes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if len(self.cause_prevalence) != self.n_causes or len(self.loading) != self.n_causes:
            raise ValueError("cause_prevalence and loading need one entry per cause")
        if len(self.background_rate) != self.n_events:
            raise ValueError("background_rate needs one entry per event")
        if len(self.rules) != self.n_drugs:
            raise ValueError("rules need one entry per drug")
        probs = list(self.cause_prevalence) + list(self.background_rate) + [self.label_noise]
        probs += [a for entries in self.loading for _, a in entries]
        if any(not (0.0 <= float(p) <= 1.0) for p in probs):
            raise ValueError("all probabilities must lie in [0, 1]")
        for entries in self.loading:
            for e, _ in entries:
                if not 0 <= int(e) < self.n_events:
                    raise ValueError(f"loading references invalid event {e}")
        for rule in self.rules:
            if rule.get("type", "any") not in ("any", "all"):
                raise ValueError(f"unknown rule type {rule.get('type')!r}")
            if not rule["events"]:
                raise ValueError("a drug rule needs at least one event")
            for e in rule["events"]:
                if not 0 <= int(e) < self.n_events:
                    raise ValueError(f"rule references invalid event {e}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(**d)


def make_config(
    n_patients: int = 2000,
    n_events: int = 40,
    n_drugs: int = 6,
    n_causes: int = 5,
    event_rate: float = 0.005,
    background_share: float = 0.5,
    cause_prevalence: float = 0.02,
    rule_extra: int = 2,
    rule_type: str = "any",
    label_noise: float = 0.05,
    seed: int = 0,
) -> SynthConfig:
    """Structured config whose per-event firing probability equals ``event_rate``.

    Events are dealt into ``n_causes`` contiguous blocks, one cause per
    block.  ``background_share`` of the rate is background noise and the rest
    comes from the cause, i.e. ``1 - (1-b)(1-p*a) = event_rate``.  Each drug
    owns a disjoint slice of a shuffled event order (so every event is
    covered by some rule) plus ``rule_extra`` further random events.
    """
    if not 0.0 <= background_share <= 1.0:
        raise ValueError("background_share must lie in [0, 1]")
    rng = np.random.default_rng([seed, 0x5EED])
    b = background_share * event_rate
    cause_part = 1.0 - (1.0 - event_rate) / (1.0 - b)
    activation = cause_part / cause_prevalence if cause_prevalence > 0 else 0.0
    if activation > 1.0:
        raise ValueError("cause_prevalence too small for the requested event rate")
    blocks = np.array_split(np.arange(n_events), n_causes)
    loading = [[[int(e), float(activation)] for e in blk] for blk in blocks]
    order = rng.permutation(n_events)
    owned = np.array_split(order, n_drugs)
    rules = []
    for c in range(n_drugs):
        events = set(int(e) for e in owned[c])
        others = [e for e in range(n_events) if e not in events]
        if rule_extra and others:
            extra = rng.choice(others, size=min(rule_extra, len(others)), replace=False)
            events.update(int(e) for e in extra)
        rules.append({"events": sorted(events), "type": rule_type})
    return SynthConfig(
        n_patients=n_patients,
        n_events=n_events,
        n_drugs=n_drugs,
        n_causes=n_causes,
        cause_prevalence=[float(cause_prevalence)] * n_causes,
        loading=loading,
        background_rate=[float(b)] * n_events,
        rules=rules,
        label_noise=float(label_noise),
        seed=int(seed),
    )


def expected_event_rates(config: SynthConfig) -> np.ndarray:
    """Analytic per-event firing probability under the noisy-OR model."""
    miss = 1.0 - np.asarray(config.background_rate, dtype=np.float64)
    for p, entries in zip(config.cause_prevalence, config.loading):
        for e, a in entries:
            miss[int(e)] *= 1.0 - p * a
    return 1.0 - miss


@dataclass
class GroundTruth:
    causes: np.ndarray          # N x L, bool
    clean_labels: np.ndarray    # N x C, 0/1 before label noise
    config: SynthConfig = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "active_causes": [np.flatnonzero(r).tolist() for r in self.causes],
            "clean_labels": [np.flatnonzero(r).tolist() for r in self.clean_labels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        config = SynthConfig.from_dict(d["config"])
        causes = np.zeros((config.n_patients, config.n_causes), dtype=bool)
        labels = np.zeros((config.n_patients, config.n_drugs), dtype=np.uint8)
        for i, idx in enumerate(d["active_causes"]):
            causes[i, idx] = True
        for i, idx in enumerate(d["clean_labels"]):
            labels[i, idx] = 1
        return cls(causes, labels, config)


def _apply_rules(x: np.ndarray, rules) -> np.ndarray:
    out = np.zeros(len(rules), dtype=np.uint8)
    for c, rule in enumerate(rules):
        hits = x[rule["events"]]
        out[c] = hits.all() if rule.get("type", "any") == "all" else hits.any()
    return out


def generate(config: SynthConfig):
    """Sample a cohort; returns ``(EventCohort, GroundTruth)``."""
    n, m, c, L = config.n_patients, config.n_events, config.n_drugs, config.n_causes
    prevalence = np.asarray(config.cause_prevalence, dtype=np.float64)
    background = np.asarray(config.background_rate, dtype=np.float64)
    load = np.zeros((L, m), dtype=np.float64)
    for l, entries in enumerate(config.loading):
        for e, a in entries:
            load[l, int(e)] = max(load[l, int(e)], float(a))

    events = np.zeros((n, m), dtype=np.uint8)
    labels = np.zeros((n, c), dtype=np.uint8)
    clean = np.zeros((n, c), dtype=np.uint8)
    causes = np.zeros((n, L), dtype=bool)
    for i in range(n):
        rng = np.random.default_rng([config.seed, i])
        active = rng.random(L) < prevalence
        fire = rng.random((L, m)) < load
        noise = rng.random(m) < background
        flips = rng.random(c) < config.label_noise
        x = (fire & active[:, None]).any(axis=0) | noise
        y = _apply_rules(x, config.rules)
        causes[i] = active
        events[i] = x
        clean[i] = y
        labels[i] = y ^ flips
    cohort = EventCohort.from_dense(
        events, labels,
        event_names=[f"event_{j:03d}" for j in range(m)],
        drug_names=[f"drug_{k:02d}" for k in range(c)],
    )
    return cohort, GroundTruth(causes, clean, config)


def write_ground_truth(truth: GroundTruth, path) -> Path:
    atomic_write_json(path, truth.to_dict())
    return Path(path)


def load_ground_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def brute_force_stats(events, max_work: float = 1e7) -> dict:
    """Naive triple-loop Bernoulli tables, kept deliberately simple.

    Returns a dict with ``n_rows``, ``counts``, ``marginals``, ``joint``
    (``{(i, j): count}`` for ``i < j`` with count >= 1) and ``conditional``
    (``{(i, j): P(E_i=1 | E_j=1)}`` for both orientations of each stored pair).
    """
    x = np.asarray(events.toarray() if hasattr(events, "toarray") else events)
    n, m = x.shape
    if n * m * m > max_work:
        raise ValueError(f"brute force limited to N*M^2 <= {max_work:g}, got {n * m * m}")
    counts = [0] * m
    for r in range(n):
        for j in range(m):
            if x[r, j] == 1:
                counts[j] += 1
    joint = {}
    for i in range(m):
        for j in range(i + 1, m):
            k = 0
            for r in range(n):
                if x[r, i] == 1 and x[r, j] == 1:
                    k += 1
            if k >= 1:
                joint[(i, j)] = k
    conditional = {}
    for (i, j), k in joint.items():
        conditional[(i, j)] = k / counts[j]
        conditional[(j, i)] = k / counts[i]
    return {
        "n_rows": n,
        "counts": counts,
        "marginals": [cnt / n for cnt in counts],
        "joint": joint,
        "conditional": conditional,
    }
