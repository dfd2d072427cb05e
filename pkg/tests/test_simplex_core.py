import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_interior
from disappointment_lab.errors import (
    DimensionMismatchError, InvalidDistributionError, LatticeTooLargeError, NotInteriorError
)
from disappointment_lab.simplex_core import (
    Distribution, EmpiricalDistribution, SimplexDelta, ellipsoid_norm_sq, enumerate_lattice, kl_divergence,
    lattice_array, lattice_blocks, lattice_size, multinomial_log_prob, multinomial_log_probs, sample_counts,
    sample_empirical
)


class TestDistribution:

    def test_renormalizes_float_dust(self):
        p = Distribution([0.5, 0.5 + 1e-9])
        assert p.weights.sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("weights", [[0.5, 0.6], [1.2, -0.2], [0.5, math.nan], []])
    def test_rejects_malformed_weights(self, weights):
        with pytest.raises(InvalidDistributionError):
            Distribution(weights)

    def test_weights_are_read_only(self):
        p = Distribution([0.25, 0.75])
        with pytest.raises(ValueError):
            p.weights[0] = 0.5

    def test_interior(self):
        assert Distribution([0.3, 0.7]).is_interior
        assert not Distribution([0.0, 1.0]).is_interior
        assert Distribution.vertex(3, 1).weights.tolist() == [0.0, 1.0, 0.0]

    def test_empirical_weights_are_exact_fractions(self):
        e = EmpiricalDistribution([1, 2, 0])
        assert e.sample_size == 3
        assert e.fractions() == (Fraction(1, 3), Fraction(2, 3), Fraction(0))
        assert e.weights.tolist() == [1 / 3, 2 / 3, 0.0]

    def test_empirical_rejects_negative_counts(self):
        with pytest.raises(InvalidDistributionError):
            EmpiricalDistribution([2, -1])

    def test_delta_must_sum_to_zero(self):
        assert SimplexDelta([0.1, -0.1]).components.tolist() == [0.1, -0.1]
        with pytest.raises(InvalidDistributionError):
            SimplexDelta([0.1, 0.1])


class TestKlDivergence:

    def test_identity(self):
        p = Distribution([0.2, 0.3, 0.5])
        assert kl_divergence(p, p) == 0.0

    def test_vertex_against_uniform(self):
        assert kl_divergence(Distribution([1, 0]), Distribution([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-12)

    def test_missing_support_is_infinite(self):
        assert kl_divergence(Distribution([0.5, 0.5]), Distribution([1, 0])) == math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kl_divergence(Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5]))

    def test_gibbs_inequality_on_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            d = int(rng.integers(2, 7))
            p, q = random_interior(rng, d), random_interior(rng, d)
            assert kl_divergence(p, q) > 0
            assert kl_divergence(p, p) <= 1e-12

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_finite_exactly_on_support_inclusion(self, d):
        patterns = [pattern for pattern in itertools.product([0, 1], repeat=d) if any(pattern)]
        for p_pattern, q_pattern in itertools.product(patterns, repeat=2):
            p = Distribution(np.array(p_pattern) / sum(p_pattern))
            q = Distribution(np.array(q_pattern) / sum(q_pattern))
            included = all(q_bit or not p_bit for p_bit, q_bit in zip(p_pattern, q_pattern))
            assert math.isfinite(kl_divergence(p, q)) == included


class TestEllipsoidNorm:

    def test_zero_delta(self):
        assert ellipsoid_norm_sq(SimplexDelta([0.0, 0.0]), Distribution([0.5, 0.5])) == 0.0

    def test_hand_values_and_homogeneity(self):
        p = Distribution([0.5, 0.5])
        delta = SimplexDelta([0.1, -0.1])
        assert ellipsoid_norm_sq(delta, p) == pytest.approx(0.02, abs=1e-15)
        assert ellipsoid_norm_sq(delta * 2, p) == pytest.approx(0.08, abs=1e-15)

    def test_positive_definite(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = random_interior(rng, 4)
            components = rng.normal(size=4)
            delta = SimplexDelta(components - components.mean())
            assert ellipsoid_norm_sq(delta, p) > 0

    def test_needs_interior(self):
        with pytest.raises(NotInteriorError):
            ellipsoid_norm_sq(SimplexDelta([0.1, -0.1]), Distribution([1.0, 0.0]))


class TestLattice:

    def test_two_samples_two_scenarios(self):
        assert [e.counts for e in enumerate_lattice(2, 2)] == [(0, 2), (1, 1), (2, 0)]

    def test_size_matches_binomial(self):
        assert len(list(enumerate_lattice(3, 3))) == 10
        assert lattice_size(3, 3) == 10

    def test_every_point_once(self):
        points = [e.counts for e in enumerate_lattice(6, 4)]
        assert len(points) == len(set(points)) == lattice_size(6, 4)
        assert all(sum(point) == 6 for point in points)

    def test_cap(self):
        with pytest.raises(LatticeTooLargeError) as raised:
            list(enumerate_lattice(10 ** 6, 6))
        assert raised.value.size == lattice_size(10 ** 6, 6)
        assert raised.value.to_record()["suggested_method"] == "importance"

    def test_cap_is_checked_before_iterating(self):
        with pytest.raises(LatticeTooLargeError):
            enumerate_lattice(10 ** 6, 6)
        with pytest.raises(LatticeTooLargeError):
            enumerate_lattice(50, 2, cap=10)

    def test_ranges_and_blocks_follow_the_same_order(self):
        whole = lattice_array(7, 3)
        assert np.array_equal(lattice_array(7, 3, start=5, stop=20), whole[5:20])
        assert [e.counts for e in enumerate_lattice(7, 3, start=5, stop=8)] == [tuple(row) for row in whole[5:8]]
        assert np.array_equal(np.vstack(list(lattice_blocks(7, 3, block_size=4))), whole)


class TestMultinomial:

    def test_hand_values(self):
        half = Distribution([0.5, 0.5])
        assert multinomial_log_prob(EmpiricalDistribution([2, 0]), half) == pytest.approx(math.log(0.25), abs=1e-12)
        assert multinomial_log_prob(EmpiricalDistribution([1, 1]), half) == pytest.approx(math.log(0.5), abs=1e-12)
        assert multinomial_log_prob(EmpiricalDistribution([9, 0]), Distribution([1, 0])) == 0.0

    def test_impossible_counts(self):
        assert multinomial_log_prob(EmpiricalDistribution([1, 1]), Distribution([1, 0])) == -math.inf

    @pytest.mark.parametrize("T, d", [(1, 2), (17, 2), (60, 2), (30, 3), (12, 4)])
    def test_lattice_mass_is_one(self, T, d):
        rng = np.random.default_rng(T * 10 + d)
        for _ in range(3):
            p = random_interior(rng, d)
            total = np.exp(multinomial_log_probs(lattice_array(T, d), p)).sum()
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_large_sample_sizes_stay_finite(self):
        value = multinomial_log_prob(EmpiricalDistribution([500, 500]), Distribution([0.5, 0.5]))
        assert math.isfinite(value)
        assert value < 0


class TestSampling:

    def test_degenerate(self):
        assert sample_empirical(Distribution([1, 0]), 37, seed=3).counts == (37, 0)

    def test_law_of_large_numbers(self):
        e = sample_empirical(Distribution([0.5, 0.5]), 10 ** 6, seed=2024)
        assert abs(e.counts[1] / 10 ** 6 - 0.5) < 0.002

    def test_deterministic_given_seed_and_stream(self):
        p = Distribution([0.2, 0.3, 0.5])
        assert np.array_equal(sample_counts(p, 40, 100, seed=7, stream=3), sample_counts(p, 40, 100, seed=7, stream=3))
        assert not np.array_equal(sample_counts(p, 40, 100, seed=7, stream=3), sample_counts(p, 40, 100, seed=7))

    def test_cell_frequencies_match_the_multinomial(self):
        p = Distribution([0.2, 0.3, 0.5])
        n = 10 ** 5
        counts = sample_counts(p, 5, n, seed=99)
        cells = lattice_array(5, 3)
        exact = np.exp(multinomial_log_probs(cells, p))
        for cell, probability in zip(cells, exact):
            observed = np.count_nonzero(np.all(counts == cell, axis=1)) / n
            assert abs(observed - probability) <= 4 * math.sqrt(probability * (1 - probability) / n) + 1e-12
