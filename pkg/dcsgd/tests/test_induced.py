#!/usr/bin/env python

import numpy as np
import pytest

from dcsgd import CompressorSpec
from dcsgd.compressors import compress, decompress, exact_outcomes, outcome_moments, nominal_delta
from dcsgd.data_models.spec import InducedCompressor
from dcsgd.exceptions import ParameterError
from dcsgd.induced import induced_compress, induced_delta, induced_variance_bound


TOP1_RAND1 = InducedCompressor(CompressorSpec.top_k(1), CompressorSpec.rand_k(1))


def induced_error(ic: InducedCompressor, x: np.ndarray) -> float:
    return sum(p * ((v - x) ** 2).sum() for p, v in exact_outcomes(ic.spec, x))


class TestInducedDelta:
    def test_same_parameter(self):
        for delta in [1.0, 2.0, 4.0, 10.0]:
            assert induced_delta(delta, delta) == pytest.approx(delta - 1 + 1 / delta, rel=1e-15)

    def test_identity_first_stage(self):
        assert induced_delta(1.0, 7.0) == 1.0

    def test_between_one_and_second(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d1, d2 = 1 + rng.exponential(size=2) * 5
            assert 1 <= induced_delta(d1, d2) <= d2

    def test_parameters_below_one(self):
        with pytest.raises(ParameterError):
            induced_delta(0.5, 2.0)
        with pytest.raises(ParameterError):
            induced_variance_bound(2.0, 0.9)

    def test_nominal_delta_of_spec(self):
        assert nominal_delta(TOP1_RAND1.spec, 4) == pytest.approx(induced_delta(4, 4))


class TestInducedOperator:
    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_unbiased_and_bounded(self, d):
        rng = np.random.default_rng(d)
        panel = [np.ones(d), np.eye(d)[0], rng.normal(size=d), rng.standard_cauchy(size=d)]
        bound = induced_variance_bound(d, d)
        for x in panel:
            mean, _ = outcome_moments(exact_outcomes(TOP1_RAND1.spec, x))
            assert np.allclose(mean, x, rtol=0, atol=1e-12)
            assert induced_error(TOP1_RAND1, x) <= bound * (x @ x) * (1 + 1e-12)

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_bound_is_attained_on_ones(self, d):
        x = np.ones(d)
        assert induced_error(TOP1_RAND1, x) == pytest.approx(induced_variance_bound(d, d) * d, rel=1e-12)

    def test_composite_message(self):
        x = np.array([4.0, 1.0, -2.0])
        m = induced_compress(TOP1_RAND1, x, np.random.default_rng(0))
        assert m.kind == "Composite"
        assert m.payload.first.payload.indices.tolist() == [0]
        dense = decompress(m)
        assert dense[0] == 4.0
        assert m.bit_cost == m.payload.first.bit_cost + m.payload.second.bit_cost

    def test_dispatch_through_spec(self):
        x = np.array([4.0, 1.0, -2.0])
        a = compress(TOP1_RAND1.spec, x, np.random.default_rng(3))
        b = induced_compress(TOP1_RAND1, x, np.random.default_rng(3))
        assert a.to_bytes() == b.to_bytes()

    def test_stage_requirements(self):
        with pytest.raises(ParameterError):
            InducedCompressor(CompressorSpec.rand_k(1), CompressorSpec.rand_k(1))
        with pytest.raises(ParameterError):
            InducedCompressor(CompressorSpec.top_k(1), CompressorSpec.top_k(1))


class TestBudgetSplit:
    def test_even_split(self):
        ic = InducedCompressor.from_budget(4, 0.5, "wangni")
        assert ic.c1 == CompressorSpec.top_k(2)
        assert ic.c2 == CompressorSpec.wangni(2)

    def test_both_stages_get_a_coordinate(self):
        ic = InducedCompressor.from_budget(2, 0.9)
        assert ic.c1.k == 1 and ic.c2.k == 1

    def test_invalid_budget(self):
        with pytest.raises(ParameterError):
            InducedCompressor.from_budget(1)
        with pytest.raises(ParameterError):
            InducedCompressor.from_budget(4, 1.5)
