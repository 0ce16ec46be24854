import numpy as np
import pytest

from fedshield.errors import MaskUniverseError, ParameterError
from fedshield.masks import SensitivityMask, mask_from_wire, mask_to_wire
from fedshield.negotiation import (
    consensus_mask,
    negotiate,
    noise_mask,
    personalized_mask,
)


def mask(indices, universe=8):
    return SensitivityMask(np.asarray(indices, dtype=np.int64), universe)


class TestConsensusMask:
    def test_three_client_majority(self):
        masks = [mask([1, 2]), mask([2, 3]), mask([2])]
        assert list(consensus_mask(masks, 0.5).indices) == [2]

    def test_rho_one_is_intersection(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            masks = [
                SensitivityMask(rng.choice(30, size=rng.integers(0, 20), replace=False), 30)
                for _ in range(rng.integers(1, 6))
            ]
            got = set(consensus_mask(masks, 1.0).indices.tolist())
            expected = set(range(30))
            for m in masks:
                expected &= set(m.indices.tolist())
            assert got == expected

    def test_rho_one_over_k_is_union(self):
        rng = np.random.default_rng(1)
        for k in (2, 3, 7, 10):  # includes k where 1/k has no exact float
            masks = [
                SensitivityMask(rng.choice(30, size=rng.integers(0, 20), replace=False), 30)
                for _ in range(k)
            ]
            got = set(consensus_mask(masks, 1.0 / k).indices.tolist())
            expected = set()
            for m in masks:
                expected |= set(m.indices.tolist())
            assert got == expected

    def test_boundary_exact_at_half(self):
        masks = [mask([0]), mask([0]), mask([1]), mask([2])]
        # index 0 has exactly 2/4 votes, must be included at rho = 0.5
        assert 0 in consensus_mask(masks, 0.5)
        assert 1 not in consensus_mask(masks, 0.5)

    def test_mixed_universe_rejected(self):
        with pytest.raises(MaskUniverseError):
            consensus_mask([mask([1], 8), mask([1], 9)], 0.5)

    def test_bad_rho_rejected(self):
        for rho in (0.0, -0.2, 1.5):
            with pytest.raises(ParameterError):
                consensus_mask([mask([1])], rho)

    def test_empty_mask_list_rejected(self):
        with pytest.raises(ParameterError):
            consensus_mask([], 0.5)


class TestZoneMasks:
    def test_personalized_is_difference(self):
        assert list(personalized_mask(mask([1, 2]), mask([2])).indices) == [1]
        assert len(personalized_mask(mask([1, 2]), mask([1, 2, 3]))) == 0
        assert list(personalized_mask(mask([1, 2]), mask([])).indices) == [1, 2]

    def test_noise_is_complement_of_union(self):
        assert list(noise_mask(4, mask([0], 4), mask([1], 4)).indices) == [2, 3]
        assert len(noise_mask(4, mask([], 4), mask([], 4))) == 4
        assert len(noise_mask(4, mask([0, 1], 4), mask([2, 3], 4))) == 0


class TestNegotiate:
    def test_single_client_rho_one(self):
        local = mask([3, 5])
        enc, parts = negotiate([local], 1.0)
        assert enc == local
        assert len(parts[0].pers) == 0

    def test_three_client_example(self):
        masks = [mask([1, 2]), mask([2, 3]), mask([2])]
        enc, parts = negotiate(masks, 0.5)
        assert list(enc.indices) == [2]
        assert list(parts[0].pers.indices) == [1]
        assert list(parts[0].noise.indices) == [0, 3, 4, 5, 6, 7]

    def test_ratios_sum_to_one(self):
        rng = np.random.default_rng(2)
        masks = [
            SensitivityMask(rng.choice(50, size=rng.integers(0, 30), replace=False), 50)
            for _ in range(5)
        ]
        _, parts = negotiate(masks, 0.4)
        for part in parts:
            assert abs(sum(part.ratios()) - 1.0) < 1e-12


class TestPartitionInvariants:
    def test_disjoint_cover_1000_trials(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            universe = int(rng.integers(4, 60))
            k = int(rng.integers(1, 8))
            rho = float(rng.uniform(0.05, 1.0))
            masks = [
                SensitivityMask(
                    rng.choice(universe, size=rng.integers(0, universe), replace=False),
                    universe,
                )
                for _ in range(k)
            ]
            _, parts = negotiate(masks, rho)
            for part in parts:
                flags = part.enc.to_bool().astype(int) + part.pers.to_bool() + part.noise.to_bool()
                assert np.all(flags == 1)

    def test_rho_monotonicity(self):
        rng = np.random.default_rng(4)
        for _ in range(200)        :
            universe = 40
            masks = [
                SensitivityMask(rng.choice(universe, size=rng.integers(0, 30), replace=False), universe)
                for _ in range(6)
            ]
            r1, r2 = sorted(rng.uniform(0.05, 1.0, size=2))
            high = set(consensus_mask(masks, r2).indices.tolist())
            low = set(consensus_mask(masks, r1).indices.tolist())
            assert high <= low

    def test_tau_to_zone_monotonicity(self):
        # with fixed scores, raising tau weakly shrinks the consensus zone
        from fedshield.sensitivity import local_mask

        rng = np.random.default_rng(5)
        score_sets = [rng.random(60) for _ in range(5)]
        previous = None
        for tau in (0.01, 0.1, 0.3, 0.6, 0.9, 1.0):
            masks = [local_mask(s, tau) for s in score_sets]
            enc = set(consensus_mask(masks, 0.5).indices.tolist())
            if previous is not None:
                assert enc <= previous
            previous = enc


class TestWireForm:
    def test_round_trip(self):
        m = mask([0, 3, 7], 8)
        assert mask_from_wire(mask_to_wire(m)) == m

    def test_empty_round_trip(self):
        m = mask([], 8)
        assert mask_from_wire(mask_to_wire(m)) == m

    def test_layout(self):
        blob = mask_to_wire(mask([1, 2], 8))
        # universe, count, then sorted u32 little-endian indices
        assert blob == bytes([8, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0])
