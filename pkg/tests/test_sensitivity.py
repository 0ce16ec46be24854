import numpy as np
import pytest

from fedshield.errors import ProtocolError
from fedshield.model import LabeledBatch, ModelSpec, backward, init_params, local_train
from fedshield.params import LayeredParameters, LayerLayout
from fedshield.sensitivity import (
    compute_fisher,
    dump_scores_csv,
    local_mask,
    normalize_per_layer,
    score_and_mask,
)

from conftest import random_instance


def layout_of(sizes):
    return LayerLayout.from_sizes(sizes)


class TestComputeFisher:
    def test_whole_batch_zero_at_stationary_point(self):
        # zero weights, zero inputs, balanced binary labels: the batch-mean
        # gradient cancels exactly (softmax probabilities are exact halves)
        spec = ModelSpec(input_dim=3, num_classes=2, hidden1=4, hidden2=3)
        layout = spec.layout()
        params = LayeredParameters(np.zeros(layout.total_params), layout)
        batch = LabeledBatch(np.zeros((2, 3)), np.array([0, 1]))
        raw = compute_fisher(params, batch, mode="whole_batch")
        assert np.all(raw == 0.0)

    def test_per_sample_avg_matches_composed_oracle(self, tiny_spec):
        rng = np.random.default_rng(0)
        params, batch = random_instance(tiny_spec, rng, batch=3)
        raw = compute_fisher(params, batch, mode="per_sample_avg")
        acc = np.zeros_like(raw)
        for i in range(len(batch)):
            g = backward(params, batch.subset(np.array([i])))
            acc += g * g
        assert np.allclose(raw, acc / len(batch), atol=1e-10, rtol=0)

    def test_jensen_per_sample_dominates_whole_batch(self, tiny_spec):
        for seed in range(50):
            rng = np.random.default_rng(100 + seed)
            params, batch = random_instance(tiny_spec, rng, batch=4)
            per_sample = compute_fisher(params, batch, mode="per_sample_avg")
            whole = compute_fisher(params, batch, mode="whole_batch")
            assert np.all(per_sample >= whole - 1e-12)

    def test_scores_nonnegative(self, tiny_spec):
        rng = np.random.default_rng(1)
        params, batch = random_instance(tiny_spec, rng)
        assert np.all(compute_fisher(params, batch) >= 0.0)

    def test_max_samples_cap(self, tiny_spec):
        rng = np.random.default_rng(2)
        params, batch = random_instance(tiny_spec, rng, batch=8)
        capped = compute_fisher(params, batch, max_samples=3)
        direct = compute_fisher(params, batch.subset(np.arange(3)))
        assert np.array_equal(capped, direct)

    def test_unknown_mode_rejected(self, tiny_spec):
        rng = np.random.default_rng(3)
        params, batch = random_instance(tiny_spec, rng)
        with pytest.raises(ValueError):
            compute_fisher(params, batch, mode="bogus")


class TestNormalizePerLayer:
    def test_simple_span(self):
        layout = layout_of([("a", 3)])
        assert np.allclose(
            normalize_per_layer(np.array([1.0, 2.0, 3.0]), layout), [0.0, 0.5, 1.0]
        )

    def test_constant_layer_maps_to_zero(self):
        layout = layout_of([("a", 2)])
        assert np.array_equal(normalize_per_layer(np.array([5.0, 5.0]), layout), [0.0, 0.0])

    def test_layers_normalize_independently(self):
        layout = layout_of([("a", 3), ("b", 2)])
        raw = np.array([10.0, 20.0, 30.0, 0.001, 0.003])
        normalized = normalize_per_layer(raw, layout)
        for _, offset, length in layout.layers:
            seg_raw = raw[offset : offset + length]
            expected = (seg_raw - seg_raw.min()) / (seg_raw.max() - seg_raw.min())
            assert np.allclose(normalized[offset : offset + length], expected)
            assert normalized[offset : offset + length].max() == 1.0
            assert normalized[offset : offset + length].min() == 0.0

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        layout = layout_of([("a", 10), ("b", 7)])
        raw = rng.uniform(0, 5, 17)
        base = normalize_per_layer(raw, layout)
        scaled = raw.copy()
        scaled[0:10] *= 37.5
        again = normalize_per_layer(scaled, layout)
        assert np.all(np.abs(base - again) <= 1e-12)


class TestLocalMask:
    def test_strict_threshold(self):
        mask = local_mask(np.array([0.0, 0.5, 1.0]), 0.5)
        assert list(mask.indices) == [2]

    def test_tau_one_empty(self):
        mask = local_mask(np.array([0.0, 0.5, 1.0]), 1.0)
        assert len(mask) == 0

    def test_negative_tau_selects_all(self):
        mask = local_mask(np.array([0.0, 0.5, 1.0]), -1.0)
        assert list(mask.indices) == [0, 1, 2]

    def test_monotone_in_tau_500_vectors(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            scores = rng.random(rng.integers(1, 40))
            t1, t2 = sorted(rng.random(2))
            higher = set(local_mask(scores, t2).indices.tolist())
            lower = set(local_mask(scores, t1).indices.tolist())
            assert higher <= lower


class TestTrainedScoreShape:
    def test_heavy_tailed_raw_scores(self):
        spec = ModelSpec(input_dim=6, num_classes=3, hidden1=8, hidden2=5)
        heavy = 0
        for seed in range(10):
            rng = np.random.default_rng(300 + seed)
            params, batch = random_instance(spec, rng, batch=30)
            trained, _ = local_train(params, batch, 10, 0.1, 10, rng)
            raw = compute_fisher(trained, batch)
            if np.median(raw) < np.mean(raw):
                heavy += 1
        assert heavy >= 9

    def test_dump_csv(self, tiny_spec, tmp_path):
        rng = np.random.default_rng(6)
        params, batch = random_instance(tiny_spec, rng)
        scores, mask = score_and_mask(params, batch, tau=0.1)
        path = tmp_path / "scores.csv"
        dump_scores_csv(scores, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "param_index,layer,raw,normalized"
        assert len(lines) == 1 + len(params)
