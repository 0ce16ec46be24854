import numpy as np
import pytest

from fedshield.data import (
    LabeledDataset,
    dirichlet_partition,
    load_csv_dataset,
    poisson_select,
    save_csv_dataset,
    synth_dataset,
)
from fedshield.errors import ParameterError


def balanced_dataset(n_per_class=40, num_classes=10, dim=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(num_classes), n_per_class)
    return LabeledDataset(rng.standard_normal((len(labels), dim)), labels, num_classes)


class TestDirichletPartition:
    def test_single_client_gets_everything(self):
        ds = balanced_dataset()
        plan = dirichlet_partition(ds, 1, 0.5, np.random.default_rng(0))
        assert len(plan.assignments) == 1
        assert np.array_equal(plan.assignments[0], np.arange(len(ds)))

    def test_huge_concentration_is_near_uniform(self):
        ds = balanced_dataset(n_per_class=400, num_classes=10)
        plan = dirichlet_partition(ds, 20, 1e6, np.random.default_rng(1))
        for idx in plan.assignments:
            per_class = np.bincount(ds.labels[idx], minlength=10)
            assert np.all(np.abs(per_class - 20) <= 2)  # within 10% of uniform

    def test_small_concentration_skews(self):
        ds = balanced_dataset(n_per_class=100, num_classes=10)
        skewed_seeds = 0
        for seed in range(10):
            plan = dirichlet_partition(ds, 10, 0.2, np.random.default_rng(seed))
            for idx in plan.assignments:
                top = np.bincount(ds.labels[idx], minlength=10).max()
                if top >= 0.5 * len(idx):
                    skewed_seeds += 1
                    break
        assert skewed_seeds >= 8

    def test_rejects_bad_concentration(self):
        ds = balanced_dataset()
        with pytest.raises(ParameterError):
            dirichlet_partition(ds, 4, 0.0, np.random.default_rng(0))

    def test_disjoint_and_covering_200_trials(self):
        ds = balanced_dataset(n_per_class=30, num_classes=5)
        rng = np.random.default_rng(42)
        for _ in range(200):
            concentration = float(rng.uniform(0.05, 10.0))
            n_clients = int(rng.integers(2, 12))
            plan = dirichlet_partition(ds, n_clients, concentration, rng)
            merged = np.concatenate(plan.assignments)
            assert len(merged) == len(np.unique(merged))
            assert len(merged) == len(ds)
            assert all(len(a) > 0 for a in plan.assignments)


class TestPoissonSelect:
    def test_q_one_selects_all(self):
        assert poisson_select(7, 1.0, np.random.default_rng(0)) == list(range(7))

    def test_mean_participation(self):
        rng = np.random.default_rng(3)
        sizes = [len(poisson_select(20, 0.5, rng)) for _ in range(10_000)]
        assert 9.7 <= np.mean(sizes) <= 10.3

    def test_never_empty_small_q(self):
        rng = np.random.default_rng(4)
        for _ in range(100_000):
            assert len(poisson_select(20, 0.01, rng)) >= 1

    def test_rejects_bad_q(self):
        with pytest.raises(ParameterError):
            poisson_select(5, 0.0, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            poisson_select(5, 1.5, np.random.default_rng(0))


class TestSynthDataset:
    def test_zero_separation_is_chance_level(self):
        from sklearn.linear_model import LogisticRegression

        ds = synth_dataset(10, 20, 2000, 0.0, np.random.default_rng(5))
        holdout = synth_dataset(10, 20, 1000, 0.0, np.random.default_rng(6))
        clf = LogisticRegression(max_iter=200).fit(ds.inputs, ds.labels)
        acc = clf.score(holdout.inputs, holdout.labels)
        assert abs(acc - 0.1) <= 0.1

    def test_strong_separation_linearly_solvable(self):
        from sklearn.linear_model import LogisticRegression

        ds = synth_dataset(10, 20, 2000, 10.0, np.random.default_rng(7))
        holdout = synth_dataset(10, 20, 1000, 10.0, np.random.default_rng(8))
        clf = LogisticRegression(max_iter=200).fit(ds.inputs, ds.labels)
        assert clf.score(holdout.inputs, holdout.labels) >= 0.95

    def test_exactly_one_sample_per_class(self):
        ds = synth_dataset(6, 8, 6, 3.0, np.random.default_rng(9))
        assert np.array_equal(np.sort(ds.labels), np.arange(6))

    def test_requires_enough_samples(self):
        with pytest.raises(ParameterError):
            synth_dataset(10, 12, 5, 1.0, np.random.default_rng(0))

    def test_pairwise_mean_distance(self):
        sep = 4.0
        ds = synth_dataset(5, 8, 5000, sep, np.random.default_rng(10))
        means = np.array([ds.inputs[ds.labels == c].mean(axis=0) for c in range(5)])
        for a in range(5):
            for b in range(a + 1, 5):
                assert np.linalg.norm(means[a] - means[b]) >= sep * 0.9


class TestCsvRoundTrip:
    def test_save_and_load(self, tmp_path):
        ds = synth_dataset(4, 6, 50, 3.0, np.random.default_rng(11))
        path = tmp_path / "data.csv"
        save_csv_dataset(ds, path)
        back = load_csv_dataset(path)
        assert back.num_classes == 4
        assert np.array_equal(back.labels, ds.labels)
        assert np.allclose(back.inputs, ds.inputs, atol=0)

    def test_header_format(self, tmp_path):
        ds = synth_dataset(3, 4, 10, 2.0, np.random.default_rng(12))
        path = tmp_path / "data.csv"
        save_csv_dataset(ds, path)
        header = path.read_text().splitlines()[0]
        assert header == "label,f0,f1,f2,f3"

    def test_rejects_negative_labels(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\n-1,0.5\n")
        with pytest.raises(ParameterError):
            load_csv_dataset(path)
