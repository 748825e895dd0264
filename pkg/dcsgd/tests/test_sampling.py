#!/usr/bin/env python

from itertools import combinations

import numpy as np
import pytest

from dcsgd import SamplingScheme
from dcsgd.exceptions import ParameterError, PropernessError
from dcsgd.sampling import (
    probability_vector,
    probability_matrix,
    expected_cardinality,
    is_proper,
    subset_distribution,
    default_eso_vector,
    validate_eso,
    draw_subset,
    pp_variance_parameters,
    check_variance_inequality,
)
from dcsgd.utils import counter_stream, subset_to_mask


def random_explicit(rng: np.random.Generator, n: int) -> SamplingScheme:
    n_subsets = int(rng.integers(1, min(2 ** n, 12) + 1))
    masks = rng.choice(2 ** n, size=n_subsets, replace=False)
    # every node appears at least once so the scheme is proper
    masks[0] = 2 ** n - 1
    weights = rng.random(n_subsets)
    return SamplingScheme.explicit(n, zip(masks.tolist(), (weights / weights.sum()).tolist()))


class TestProbabilities:
    def test_full(self):
        s = SamplingScheme.full(3)
        assert np.array_equal(probability_vector(s), np.ones(3))
        assert np.array_equal(probability_matrix(SamplingScheme.full(2)), np.ones((2, 2)))

    def test_b_nice(self):
        assert np.allclose(probability_vector(SamplingScheme.b_nice(4, 2)), 0.5)
        P = probability_matrix(SamplingScheme.b_nice(3, 2))
        assert np.allclose(np.diag(P), 2 / 3)
        assert np.allclose(P[~np.eye(3, dtype=bool)], 1 / 3)

    def test_independent(self):
        P = probability_matrix(SamplingScheme.independent([0.5, 0.5]))
        assert np.allclose(P, [[0.5, 0.25], [0.25, 0.5]])

    def test_explicit_improper(self):
        s = SamplingScheme.explicit(2, [(0b00, 0.5), (0b01, 0.5)])
        assert np.allclose(probability_vector(s), [0.5, 0.0])
        assert not is_proper(s)
        with pytest.raises(PropernessError):
            default_eso_vector(s)
        with pytest.raises(PropernessError):
            draw_subset(s, counter_stream(0))

    @pytest.mark.parametrize(
        "scheme",
        [
            SamplingScheme.full(4),
            SamplingScheme.b_nice(5, 2),
            SamplingScheme.independent([0.2, 0.7, 1.0]),
            SamplingScheme.explicit(3, [(0b011, 0.25), (0b110, 0.5), (0b101, 0.25)]),
        ],
        ids=repr,
    )
    def test_parametric_matches_enumeration(self, scheme):
        n = scheme.n
        p, P = np.zeros(n), np.zeros((n, n))
        for subset, prob in subset_distribution(scheme):
            indicator = np.zeros(n)
            indicator[subset] = 1
            p += prob * indicator
            P += prob * np.outer(indicator, indicator)
        assert np.allclose(probability_vector(scheme), p, atol=1e-12)
        assert np.allclose(probability_matrix(scheme), P, atol=1e-12)
        assert np.trace(P) == pytest.approx(expected_cardinality(scheme))
        assert np.linalg.eigvalsh(P - np.outer(p, p)).min() >= -1e-10

    def test_explicit_table_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            SamplingScheme.explicit(2, [(0b01, 0.5), (0b10, 0.4)])

    def test_explicit_size_guard(self):
        with pytest.raises(ParameterError):
            SamplingScheme.explicit(21, [(1, 1.0)])


class TestEso:
    def test_default_vectors(self):
        assert not default_eso_vector(SamplingScheme.full(3)).any()
        assert np.allclose(default_eso_vector(SamplingScheme.b_nice(4, 1)), 3.0)
        assert np.allclose(default_eso_vector(SamplingScheme.independent([0.5, 0.5])), 1.0)

    def test_tight_independent(self):
        cert = validate_eso(SamplingScheme.independent([0.5, 0.5]), [0.5, 0.5])
        assert cert.valid
        assert cert.min_eig == pytest.approx(0.0, abs=1e-15)

    def test_full_with_zero(self):
        assert validate_eso(SamplingScheme.full(4), np.zeros(4)).valid

    def test_negative_entries_rejected(self):
        with pytest.raises(ParameterError):
            validate_eso(SamplingScheme.full(2), [0.0, -1.0])

    def test_too_small_vector_is_invalid(self):
        assert not validate_eso(SamplingScheme.b_nice(4, 1), np.full(4, 0.5)).valid

    def test_default_always_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            s = random_explicit(rng, int(rng.integers(1, 7)))
            assert validate_eso(s, default_eso_vector(s)).valid


class TestVarianceParameters:
    def test_full_reduces_to_delta_n(self):
        a_s, delta_s = pp_variance_parameters(SamplingScheme.full(8), np.zeros(8), 4.0)
        assert a_s == 0.0
        assert delta_s == pytest.approx(1.375, rel=1e-15)

    def test_b_nice_single(self):
        s = SamplingScheme.b_nice(4, 1)
        a_s, delta_s = pp_variance_parameters(s, default_eso_vector(s), 1.0)
        assert a_s == pytest.approx(12.0)
        assert delta_s == pytest.approx(1.0)
        _, delta_s = pp_variance_parameters(s, default_eso_vector(s), 2.0)
        assert delta_s == pytest.approx(7.25)

    def test_independent(self):
        a_s, delta_s = pp_variance_parameters(SamplingScheme.independent([0.5, 0.5]), [0.5, 0.5], 1.0)
        assert a_s == pytest.approx(1.0)
        assert delta_s == pytest.approx(1.5)

    def test_invalid_certificate(self):
        with pytest.raises(ParameterError):
            pp_variance_parameters(SamplingScheme.b_nice(4, 1), np.zeros(4), 2.0)


class TestVarianceInequality:
    def test_tight_example(self):
        lhs, rhs = check_variance_inequality(
            SamplingScheme.independent([0.5, 0.5]), [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]]
        )
        assert lhs == pytest.approx(0.5, abs=1e-15)
        assert rhs == pytest.approx(0.5, abs=1e-15)

    def test_full_is_exact(self):
        zetas = np.random.default_rng(1).normal(size=(3, 4))
        lhs, rhs = check_variance_inequality(SamplingScheme.full(3), np.zeros(3), zetas)
        assert lhs == pytest.approx(0.0, abs=1e-24)
        assert rhs == 0.0

    def test_b_nice_identical_vectors(self):
        s = SamplingScheme.b_nice(2, 1)
        lhs, rhs = check_variance_inequality(s, default_eso_vector(s), [[1.0, 0.0], [1.0, 0.0]])
        assert lhs == pytest.approx(0.0, abs=1e-15)
        assert lhs <= rhs

    def test_random_explicit_schemes(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            s = random_explicit(rng, n)
            zetas = rng.normal(size=(n, 3)) * rng.exponential(size=(n, 1))
            lhs, rhs = check_variance_inequality(s, default_eso_vector(s), zetas)
            assert lhs <= rhs + 1e-10

    def test_enumeration_guard(self):
        s = SamplingScheme.b_nice(13, 2)
        with pytest.raises(ParameterError):
            check_variance_inequality(s, default_eso_vector(s), np.ones((13, 2)))


class TestDraws:
    def test_full_always_everyone(self):
        s = SamplingScheme.full(5)
        for k in range(10):
            assert draw_subset(s, counter_stream(0, k)).tolist() == list(range(5))

    def test_reproducible(self):
        s = SamplingScheme.independent([0.3, 0.6, 0.9, 0.5])
        a = draw_subset(s, counter_stream(7, 3))
        b = draw_subset(s, counter_stream(7, 3))
        assert np.array_equal(a, b)

    def test_explicit_only_listed_subsets(self):
        s = SamplingScheme.explicit(3, [(0b011, 0.5), (0b100, 0.5)])
        rng = counter_stream(1)
        for _ in range(100):
            assert subset_to_mask(draw_subset(s, rng)) in (0b011, 0b100)

    @pytest.mark.slow
    def test_b_nice_pairs_uniform(self):
        s = SamplingScheme.b_nice(4, 2)
        rng = counter_stream(11)
        draws = 100_000
        counts = dict.fromkeys(combinations(range(4), 2), 0)
        for _ in range(draws):
            counts[tuple(draw_subset(s, rng).tolist())] += 1
        p = 1 / 6
        se = np.sqrt(p * (1 - p) / draws)
        for count in counts.values():
            assert abs(count / draws - p) <= 4 * se

    @pytest.mark.slow
    def test_explicit_table_frequencies(self):
        table = [(0b001, 0.2), (0b110, 0.5), (0b111, 0.3)]
        s = SamplingScheme.explicit(3, table)
        rng = counter_stream(13)
        draws = 100_000
        counts = dict.fromkeys([mask for mask, _ in table], 0)
        for _ in range(draws):
            counts[subset_to_mask(draw_subset(s, rng))] += 1
        for mask, p in table:
            se = np.sqrt(p * (1 - p) / draws)
            assert abs(counts[mask] / draws - p) <= 4 * se

    @pytest.mark.slow
    def test_inclusion_frequencies(self):
        s = SamplingScheme.independent([0.1, 0.5, 0.8])
        rng = counter_stream(5)
        draws = 100_000
        hits = np.zeros(3)
        for _ in range(draws):
            hits[draw_subset(s, rng)] += 1
        p = probability_vector(s)
        se = np.sqrt(p * (1 - p) / draws)
        assert (np.abs(hits / draws - p) <= 4 * se).all()


class TestFromFile:
    def test_table(self, tmp_path):
        path = tmp_path / "sampling.txt"
        path.write_text("# bitmask probability\n0b01 0.25\n2 0.25\n0x3 0.5  # both\n")
        s = SamplingScheme.from_file(path, 2)
        assert s.table == ((1, 0.25), (2, 0.25), (3, 0.5))
        assert np.allclose(probability_vector(s), [0.75, 0.75])

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError, match="missing.txt"):
            SamplingScheme.from_file(tmp_path / "missing.txt")

    def test_bad_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 0.5 extra\n")
        with pytest.raises(ParameterError):
            SamplingScheme.from_file(path)
