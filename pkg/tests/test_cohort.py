import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from berngraph.cohort import (CohortError, EventCohort, allocate_sizes, load_cohort,
                              save_cohort, sparsity, split)


def write_manifest(tmp_path, n, m, c, events_lines, labels_lines, **extra):
    (tmp_path / "ev.csv").write_text("row,col\n" + "".join(f"{l}\n" for l in events_lines))
    (tmp_path / "lb.csv").write_text("row,col\n" + "".join(f"{l}\n" for l in labels_lines))
    manifest = {
        "n_patients": n, "n_events": m, "n_drugs": c,
        "event_names": [f"e{j}" for j in range(m)],
        "drug_names": [f"d{k}" for k in range(c)],
        "events_file": "ev.csv", "labels_file": "lb.csv",
    }
    manifest.update(extra)
    path = tmp_path / "cohort.json"
    path.write_text(json.dumps(manifest))
    return path


class TestLoad:
    def test_empty_triplets_give_zero_matrices(self, tmp_path):
        cohort = load_cohort(write_manifest(tmp_path, 3, 4, 2, [], []))
        assert cohort.event_rows().shape == (3, 4)
        assert cohort.label_rows().shape == (3, 2)
        assert cohort.events.nnz == 0 and cohort.labels.nnz == 0

    def test_reconstruction(self, tmp_path):
        cohort = load_cohort(write_manifest(tmp_path, 3, 4, 2, ["0,1", "0,3", "2,0"], []))
        dense = cohort.event_rows()
        # direct reconstruction: place a 1 at each listed coordinate
        expected = np.zeros((3, 4))
        for r, c in [(0, 1), (0, 3), (2, 0)]:
            expected[r, c] = 1
        np.testing.assert_array_equal(dense, expected)
        np.testing.assert_array_equal(dense[0], [0, 1, 0, 1])
        np.testing.assert_array_equal(dense[2], [1, 0, 0, 0])

    def test_out_of_range(self, tmp_path):
        with pytest.raises(CohortError, match=r"ev.csv:2: coordinate \(5,0\) out of range"):
            load_cohort(write_manifest(tmp_path, 3, 4, 2, ["5,0"], []))

    def test_duplicate(self, tmp_path):
        with pytest.raises(CohortError, match=r"ev.csv:3: duplicate coordinate \(1,1\)"):
            load_cohort(write_manifest(tmp_path, 3, 4, 2, ["1,1", "1,1"], []))

    def test_non_binary_value(self, tmp_path):
        path = write_manifest(tmp_path, 3, 4, 2, [], [])
        (tmp_path / "ev.csv").write_text("row,col,value\n0,0,2\n")
        with pytest.raises(CohortError, match=r"ev.csv:2: value 2 at \(0,0\)"):
            load_cohort(path)

    def test_dimension_mismatch(self, tmp_path):
        path = write_manifest(tmp_path, 3, 4, 2, [], [])
        manifest = json.loads(path.read_text())
        manifest["event_names"] = ["a", "b"]
        path.write_text(json.dumps(manifest))
        with pytest.raises(CohortError, match="n_events=4 but 2 event_names"):
            load_cohort(path)

    def test_label_out_of_range(self, tmp_path):
        with pytest.raises(CohortError, match=r"lb.csv:2: coordinate \(0,2\)"):
            load_cohort(write_manifest(tmp_path, 3, 4, 2, [], ["0,2"]))

    def test_missing_file(self, tmp_path):
        path = write_manifest(tmp_path, 3, 4, 2, [], [])
        (tmp_path / "lb.csv").unlink()
        with pytest.raises(CohortError, match="not found"):
            load_cohort(path)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        ev = (rng.random((20, 7)) < 0.2).astype(int)
        lb = (rng.random((20, 3)) < 0.3).astype(int)
        cohort = EventCohort.from_dense(ev, lb, group_ids=[i // 2 for i in range(20)])
        path = save_cohort(cohort, tmp_path / "out" / "c.json")
        again = load_cohort(path)
        assert (again.events != cohort.events).nnz == 0
        assert (again.labels != cohort.labels).nnz == 0
        assert again.event_names == cohort.event_names
        assert again.group_ids == cohort.group_ids
        path2 = save_cohort(again, tmp_path / "out2" / "c.json")
        assert (tmp_path / "out" / "c_events.csv").read_bytes() == \
            (tmp_path / "out2" / "c_events.csv").read_bytes()
        assert path.read_bytes() == path2.read_bytes()

    def test_written_format(self, tmp_path):
        cohort = EventCohort.from_dense([[0, 1], [1, 0]], [[1], [0]])
        save_cohort(cohort, tmp_path / "c.json")
        text = (tmp_path / "c_events.csv").read_bytes()
        assert text == b"row,col\n0,1\n1,0\n"


class TestCohortInvariants:
    def test_names_must_match(self):
        with pytest.raises(CohortError):
            EventCohort(sp.csr_matrix(np.eye(2)), sp.csr_matrix(np.eye(2)), ("a",), ("x", "y"))

    def test_values_must_be_one(self):
        with pytest.raises(CohortError):
            EventCohort.from_dense([[2, 0]], [[1]])


class TestSplit:
    def cohort(self, n, groups=None):
        return EventCohort.from_dense(np.zeros((n, 2), int), np.zeros((n, 1), int), group_ids=groups)

    def test_exact_sizes(self):
        assert split(self.cohort(10), (0.6, 0.2, 0.2), seed=0).sizes() == (6, 2, 2)

    def test_deterministic(self):
        a = split(self.cohort(10), seed=0)
        b = split(self.cohort(10), seed=0)
        assert a == b
        assert split(self.cohort(10), seed=1) != a

    def test_rounding_n7(self):
        # quotas 4.2 / 1.4 / 1.4: floors 4,1,1; one seat left, val and test tie
        # on remainder 0.4, so it goes to train
        assert allocate_sizes(7, (0.6, 0.2, 0.2)) == [5, 1, 1]
        assert split(self.cohort(7), seed=3).sizes() == (5, 1, 1)

    def test_largest_remainder(self):
        # quotas 5.1 / 2.55 / 2.35 -> floors 5,2,2, one seat to the 0.55 remainder
        assert allocate_sizes(10, (0.51, 0.255, 0.235)) == [5, 3, 2]

    def test_too_small(self):
        with pytest.raises(CohortError, match="too small"):
            split(self.cohort(2), seed=0)

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split(self.cohort(10), (0.5, 0.2, 0.2))
        with pytest.raises(ValueError):
            split(self.cohort(10), (1.2, -0.1, -0.1))

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(4, 300), seed=st.integers(0, 2**31))
    def test_partition(self, n, seed):
        s = split(self.cohort(n), seed=seed)
        rows = s.train_rows + s.val_rows + s.test_rows
        assert sorted(rows) == list(range(n))
        assert all(k >= 1 for k in s.sizes())
        quotas = (0.6 * n, 0.2 * n, 0.2 * n)
        assert all(abs(k - q) < 2 for k, q in zip(s.sizes(), quotas))

    @settings(max_examples=40, deadline=None)
    @given(sizes=st.lists(st.integers(1, 4), min_size=5, max_size=40), seed=st.integers(0, 1000))
    def test_group_coherence(self, sizes, seed):
        groups = [f"p{g}" for g, k in enumerate(sizes) for _ in range(k)]
        s = split(self.cohort(len(groups), groups), seed=seed)
        assert sorted(s.train_rows + s.val_rows + s.test_rows) == list(range(len(groups)))
        where = {}
        for part, rows in enumerate((s.train_rows, s.val_rows, s.test_rows)):
            for r in rows:
                assert where.setdefault(groups[r], part) == part


class TestSparsity:
    def test_all_zero(self):
        assert sparsity(sp.csr_matrix((3, 4))) == 1.0

    def test_three_ones(self):
        m = np.zeros((3, 4))
        m[0, 0] = m[1, 2] = m[2, 3] = 1
        nnz = sum(1 for v in m.ravel() if v != 0)
        assert nnz == 3
        assert sparsity(sp.csr_matrix(m)) == 1 - 3 / 12 == 0.75
        assert sparsity(m) == 0.75

    def test_empty(self):
        with pytest.raises(ValueError):
            sparsity(np.zeros((0, 4)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 20), st.floats(0, 1), st.integers(0, 100))
    def test_complement(self, r, c, p, seed):
        m = (np.random.default_rng(seed).random((r, c)) < p).astype(int)
        assert sparsity(sp.csr_matrix(m)) + np.count_nonzero(m) / (r * c) == pytest.approx(1.0, abs=0)
