import numpy as np
import pytest

from berngraph.cohort import sparsity
from berngraph.synth import (GroundTruth, SynthConfig, brute_force_stats, expected_event_rates,
                             generate, load_ground_truth, make_config, write_ground_truth)


def tiny_config(**kw):
    base = dict(n_patients=50, n_events=3, n_drugs=1, n_causes=1, cause_prevalence=[0.5],
                loading=[[[0, 0.9], [1, 0.9]]], background_rate=[0.1, 0.1, 0.1],
                rules=[{"events": [0, 1], "type": "any"}], label_noise=0.0, seed=0)
    base.update(kw)
    return SynthConfig(**base)


class TestConfig:
    def test_analytic_rate(self):
        cfg = make_config()
        np.testing.assert_allclose(expected_event_rates(cfg), 0.005, rtol=1e-12)

    def test_rules_cover_every_event(self):
        cfg = make_config(rule_extra=0)
        covered = sorted(e for r in cfg.rules for e in r["events"])
        assert covered == list(range(cfg.n_events))

    @pytest.mark.parametrize("bad", [
        dict(label_noise=1.5),
        dict(rules=[{"events": [7], "type": "any"}]),
        dict(rules=[{"events": [0], "type": "xor"}]),
        dict(n_causes=0, cause_prevalence=[], loading=[]),
        dict(background_rate=[0.1]),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            tiny_config(**bad)

    def test_dict_round_trip(self):
        cfg = make_config(n_patients=10)
        assert SynthConfig.from_dict(cfg.to_dict()) == cfg


class TestGenerate:
    def test_any_rule_without_noise(self):
        cohort, truth = generate(tiny_config())
        x = cohort.event_rows()
        y = cohort.label_rows()[:, 0]
        np.testing.assert_array_equal(y, (x[:, 0] + x[:, 1] > 0).astype(float))
        np.testing.assert_array_equal(truth.clean_labels[:, 0], y)

    def test_all_rule(self):
        cohort, _ = generate(tiny_config(rules=[{"events": [0, 1], "type": "all"}]))
        x = cohort.event_rows()
        np.testing.assert_array_equal(cohort.label_rows()[:, 0], x[:, 0] * x[:, 1])

    def test_degenerate_all_zero(self):
        cfg = tiny_config(cause_prevalence=[0.0], background_rate=[0.0] * 3)
        cohort, truth = generate(cfg)
        assert cohort.events.nnz == 0
        assert sparsity(cohort.events) == 1.0
        assert not truth.causes.any()

    def test_deterministic(self):
        a, ta = generate(make_config(n_patients=300, seed=4))
        b, tb = generate(make_config(n_patients=300, seed=4))
        assert (a.events != b.events).nnz == 0 and (a.labels != b.labels).nnz == 0
        assert np.array_equal(ta.causes, tb.causes)
        c, _ = generate(make_config(n_patients=300, seed=5))
        assert (a.events != c.events).nnz > 0

    def test_patient_streams_independent_of_n(self):
        # counter-based seeding: the first rows do not depend on cohort size
        a, _ = generate(make_config(n_patients=100, seed=2))
        b, _ = generate(make_config(n_patients=300, seed=2))
        assert np.array_equal(a.event_rows(), b.event_rows(range(100)))

    def test_noise_only_flips_labels(self):
        cfg = make_config(n_patients=500, label_noise=0.2, seed=1)
        cohort, truth = generate(cfg)
        flipped = (cohort.label_rows() != truth.clean_labels).mean()
        assert 0.15 < flipped < 0.25

    def test_sparsity_regime(self):
        cohort, _ = generate(make_config())
        assert 0.990 <= sparsity(cohort.events) <= 0.999

    def test_marginal_convergence(self):
        cfg = make_config(n_patients=20000, n_events=200, n_drugs=4, n_causes=10,
                          event_rate=0.05, cause_prevalence=0.2, seed=3)
        cohort, _ = generate(cfg)
        rho = expected_event_rates(cfg)
        emp = np.asarray(cohort.events.mean(axis=0)).ravel()
        inside = np.abs(emp - rho) < 3 * np.sqrt(rho * (1 - rho) / cfg.n_patients)
        assert inside.mean() >= 0.99

    def test_ground_truth_round_trip(self, tmp_path):
        cohort, truth = generate(make_config(n_patients=80, seed=6))
        write_ground_truth(truth, tmp_path / "gt.json")
        again = load_ground_truth(tmp_path / "gt.json")
        assert np.array_equal(again.causes, truth.causes)
        assert np.array_equal(again.clean_labels, truth.clean_labels)
        assert again.config == truth.config
        assert isinstance(again, GroundTruth)


class TestBruteForce:
    def test_fixture(self):
        ref = brute_force_stats(np.array([[1, 1], [1, 0], [0, 1], [0, 0]]))
        assert ref["conditional"][(0, 1)] == 0.5
        assert ref["joint"] == {(0, 1): 1}

    def test_identical_columns(self):
        ref = brute_force_stats(np.array([[1, 1], [1, 1], [0, 0]]))
        assert ref["conditional"] == {(0, 1): 1.0, (1, 0): 1.0}

    def test_disjoint(self):
        assert brute_force_stats(np.array([[1, 0], [0, 1]]))["joint"] == {}

    def test_size_guard(self):
        with pytest.raises(ValueError, match="brute force"):
            brute_force_stats(np.zeros((1000, 200)), max_work=1e7)
