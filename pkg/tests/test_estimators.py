"""Tests for the oracle-accuracy estimators and batch statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from probisect.estimators import (
    BatchStats,
    boost_majority,
    clamp_estimate,
    clt_prob,
    empirical_majority,
    exact_bias,
    majority_likelihood,
    minority_count,
    posterior_mean,
    posterior_median,
    posterior_mode,
    posterior_pdf_unnorm,
    tpo_boundary,
)


class TestBatchStats:
    def test_sign_only(self):
        s = BatchStats(k=10, b_k=7)
        assert not s.has_functional
        assert s.raw_count == 10

    def test_functional_sums(self):
        s = BatchStats(k=4, b_k=3, sum_z=0.4, sum_z_sq=0.16)
        assert s.has_functional

    def test_count_bounds(self):
        with pytest.raises(ValueError):
            BatchStats(k=5, b_k=6)
        with pytest.raises(ValueError):
            BatchStats(k=0, b_k=0)

    def test_sums_must_come_together(self):
        with pytest.raises(ValueError):
            BatchStats(k=4, b_k=2, sum_z=1.0)

    def test_second_moment_bound(self):
        # sum of squares below (sum)^2/k is impossible for real draws
        with pytest.raises(ValueError):
            BatchStats(k=4, b_k=2, sum_z=4.0, sum_z_sq=1.0)

    def test_preaveraged_raw_count(self):
        s = BatchStats(k=8, b_k=5, raw_count=200)
        assert s.raw_count == 200
        with pytest.raises(ValueError):
            BatchStats(k=8, b_k=5, raw_count=4)


class TestEmpiricalMajority:
    def test_majority_side(self):
        assert empirical_majority(BatchStats(k=10, b_k=7)) == pytest.approx(0.7)

    def test_tie(self):
        assert empirical_majority(BatchStats(k=10, b_k=5)) == pytest.approx(0.5)

    def test_unanimous_minority(self):
        assert empirical_majority(BatchStats(k=4, b_k=0)) == pytest.approx(1.0)

    def test_minority_count(self):
        assert minority_count(BatchStats(k=10, b_k=7)) == 3
        assert minority_count(BatchStats(k=10, b_k=2)) == 2


class TestMajorityLikelihood:
    def test_mixed_batch(self):
        assert majority_likelihood(1, 4, 0.7) == pytest.approx(0.4872, abs=1e-10)

    def test_tie_batch(self):
        assert majority_likelihood(2, 4, 0.7) == pytest.approx(0.2646, abs=1e-10)

    def test_total_probability(self):
        for k in (3, 4, 5, 10, 11):
            for p in (0.5, 0.6, 0.8, 0.95):
                total = sum(majority_likelihood(j, k, p) for j in range(k // 2 + 1))
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_invalid_minority_count(self):
        with pytest.raises(ValueError):
            majority_likelihood(3, 4, 0.7)
        with pytest.raises(ValueError):
            majority_likelihood(-1, 4, 0.7)


class TestPosteriorPdf:
    def test_mixed_value(self):
        assert posterior_pdf_unnorm(0.75, 1, 2) == pytest.approx(0.1875, abs=1e-12)

    def test_asymmetric_value(self):
        assert posterior_pdf_unnorm(0.75, 0, 2) == pytest.approx(0.625, abs=1e-12)

    def test_half_limit(self):
        assert posterior_pdf_unnorm(0.5 + 1e-12, 0, 2) == pytest.approx(0.5, abs=1e-9)

    def test_vectorized(self):
        ps = np.array([0.6, 0.75, 0.9])
        vals = posterior_pdf_unnorm(ps, 0, 2)
        assert vals.shape == (3,)
        assert vals[1] == pytest.approx(0.625, abs=1e-12)


class TestPosteriorPointEstimates:
    def test_mode_boundary_max(self):
        assert posterior_mode(0, 2) == pytest.approx(1.0, abs=1e-9)

    def test_mode_lower_boundary(self):
        assert posterior_mode(1, 2) == pytest.approx(0.5, abs=1e-9)

    def test_mode_interior(self):
        # independently computed by grid + golden-section refinement
        assert posterior_mode(3, 10) == pytest.approx(0.68192083, abs=1e-6)

    def test_median_frozen_values(self):
        # roots of the exact integral equations, solved to 14 digits offline
        assert posterior_median(1, 2) == pytest.approx(0.6736481776669303, abs=1e-7)
        assert posterior_median(0, 2) == pytest.approx(0.7980358189916608, abs=1e-7)
        assert posterior_median(2, 4) == pytest.approx(0.6405638352103529, abs=1e-7)

    def test_mean_exact_rationals(self):
        assert posterior_mean(0, 2) == pytest.approx(25.0 / 32.0, rel=1e-12)
        assert posterior_mean(1, 2) == pytest.approx(11.0 / 16.0, rel=1e-12)
        assert posterior_mean(2, 4) == pytest.approx(21.0 / 32.0, rel=1e-12)

    def test_mean_matches_quadrature(self):
        for j, k in [(0, 7), (2, 9), (5, 20), (10, 50)]:
            num = integrate.quad(
                lambda p: p * posterior_pdf_unnorm(p, j, k), 0.5, 1.0, limit=200
            )[0]
            den = integrate.quad(
                lambda p: posterior_pdf_unnorm(p, j, k), 0.5, 1.0, limit=200
            )[0]
            assert posterior_mean(j, k) == pytest.approx(num / den, abs=1e-8)

    @given(st.integers(min_value=2, max_value=60), st.data())
    @settings(max_examples=40, deadline=None)
    def test_all_point_estimates_in_range(self, k, data):
        j = data.draw(st.integers(min_value=0, max_value=k // 2))
        for est in (posterior_mode(j, k), posterior_median(j, k), posterior_mean(j, k)):
            assert 0.5 <= est <= 1.0


class TestBoostMajority:
    def test_three_votes(self):
        assert boost_majority(0.7, 3) == pytest.approx(0.784, abs=1e-12)

    def test_single_vote_identity(self):
        for p in (0.5, 0.66, 0.9, 1.0):
            assert boost_majority(p, 1) == pytest.approx(p, abs=1e-12)

    def test_coin_flip_stays_half(self):
        for k in (1, 3, 5, 9):
            assert boost_majority(0.5, k) == pytest.approx(0.5, abs=1e-12)

    def test_boost_amplifies_odd_committees(self):
        for k in (3, 5, 11, 25):
            for p in (0.55, 0.7, 0.9):
                assert boost_majority(p, k) > p

    def test_even_tie_counted_incorrect(self):
        # strict majority of 2 votes needs both correct
        assert boost_majority(0.7, 2) == pytest.approx(0.49, abs=1e-12)


class TestCltProb:
    def test_zero_mean(self):
        s = BatchStats(k=4, b_k=2, sum_z=0.0, sum_z_sq=1.0)
        assert clt_prob(s) == pytest.approx(0.5, abs=1e-12)

    def test_unit_z_score(self):
        # k=4, mean 0.1, sample sd 0.2 -> Phi(1)
        s = BatchStats(k=4, b_k=3, sum_z=0.4, sum_z_sq=0.16)
        assert clt_prob(s) == pytest.approx(stats.norm.cdf(1.0), abs=1e-12)

    def test_same_z_score_same_probability(self):
        # k=100, mean 0.05, sd 0.5 -> also Phi(1)
        sum_z = 100 * 0.05
        sum_sq = 99 * 0.25 + 100 * 0.05**2
        s = BatchStats(k=100, b_k=60, sum_z=sum_z, sum_z_sq=sum_sq)
        assert clt_prob(s) == pytest.approx(stats.norm.cdf(1.0), abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        z = rng.normal(0.3, 1.0, size=50)
        for c in (1.0, 3.7, 0.01):
            zc = c * z
            s = BatchStats(
                k=50,
                b_k=int((zc > 0).sum()),
                sum_z=float(zc.sum()),
                sum_z_sq=float((zc**2).sum()),
            )
            if c == 1.0:
                base = clt_prob(s)
            else:
                assert clt_prob(s) == pytest.approx(base, rel=1e-9)

    def test_zero_variance_is_certain(self):
        z = np.full(5, 0.3)
        s = BatchStats(
            k=5, b_k=5, sum_z=float(z.sum()), sum_z_sq=float((z**2).sum())
        )
        assert clt_prob(s) == 1.0

    def test_needs_functional_sums(self):
        with pytest.raises(ValueError):
            clt_prob(BatchStats(k=10, b_k=7))


class TestExactBias:
    def test_frozen_values(self):
        assert exact_bias(0.7, 3) == pytest.approx(0.090, abs=1e-12)
        assert exact_bias(0.6, 5) == pytest.approx(0.1024, abs=1e-12)

    def test_perfect_oracle_no_bias(self):
        assert exact_bias(1.0, 3) == pytest.approx(0.0, abs=1e-15)

    def test_small_batch_rejected(self):
        with pytest.raises(ValueError):
            exact_bias(0.7, 2)

    def test_matches_enumeration(self):
        # E[max(B/k, 1-B/k)] - p by direct summation
        for p in (0.55, 0.75, 0.95):
            for k in (3, 6, 11):
                mean = sum(
                    stats.binom.pmf(b, k, p) * max(b / k, 1.0 - b / k)
                    for b in range(k + 1)
                )
                assert exact_bias(p, k) == pytest.approx(mean - p, abs=1e-12)

    def test_overestimation_everywhere(self):
        for p in np.arange(0.55, 0.96, 0.05):
            for k in range(3, 16):
                assert exact_bias(float(p), k) > 0.0


class TestTpoBoundary:
    def test_frozen_values(self):
        assert tpo_boundary(1, 0.2, 0.05) == pytest.approx(0.7312789742727697, rel=1e-12)
        assert tpo_boundary(1, 0.2, 1.0) == pytest.approx(0.23548200450309495, rel=1e-12)

    def test_linear_in_sigma(self):
        assert tpo_boundary(7, 0.4, 0.1) == pytest.approx(
            2.0 * tpo_boundary(7, 0.2, 0.1), rel=1e-12
        )

    def test_monotone_in_k_and_alpha(self):
        ks = [tpo_boundary(k, 0.2, 0.05) for k in range(1, 40)]
        assert all(b > a for a, b in zip(ks, ks[1:]))
        assert tpo_boundary(5, 0.2, 0.01) > tpo_boundary(5, 0.2, 0.2)


class TestClampEstimate:
    def test_upper_clamp(self):
        assert clamp_estimate(1.0, 500) == pytest.approx(0.999, abs=1e-12)

    def test_interior_unchanged(self):
        assert clamp_estimate(0.7, 250) == 0.7

    def test_lower_bound(self):
        for k in (1, 5, 1000):
            assert clamp_estimate(0.5, k) == 0.5

    def test_single_draw_clamps_to_half(self):
        # 1 - 1/(2*1) = 0.5: a one-call batch cannot move the state
        assert clamp_estimate(1.0, 1) == 0.5
