"""Tests for single-response and batched knowledge-state updates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probisect.density import uniform_prior
from probisect.updating import (
    DegenerateUpdateError,
    UpdateSignal,
    apply_update,
    batched_update,
    boosted_update,
    gamma_prob,
    right_scaling_factor,
    step_update,
)


def _heights(f):
    return np.exp(f.log_heights)


class TestUpdateSignal:
    def test_batched_counts_fields(self):
        sig = UpdateSignal("batched-counts", p_hat=0.8, b_k=7, k=10)
        assert (sig.b_k, sig.k) == (7, 10)

    def test_count_out_of_range(self):
        with pytest.raises(ValueError):
            UpdateSignal("batched-counts", p_hat=0.8, b_k=11, k=10)
        with pytest.raises(ValueError):
            UpdateSignal("batched-counts", p_hat=0.8, b_k=-1, k=10)

    def test_accuracy_out_of_range(self):
        with pytest.raises(ValueError):
            UpdateSignal("batched-counts", p_hat=0.3, b_k=1, k=2)
        with pytest.raises(ValueError):
            UpdateSignal("boosted-binary", p_hat=1.2, direction=1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            UpdateSignal("other", p_hat=0.8, b_k=1, k=2)

    def test_boosted_needs_direction(self):
        with pytest.raises(ValueError):
            UpdateSignal("boosted-binary", p_hat=0.8, direction=0)


class TestGammaProb:
    def test_median_point(self):
        f = uniform_prior(0.0, 1.0)
        assert gamma_prob(f, 0.5, 0.7) == pytest.approx(0.5, abs=1e-15)

    def test_off_median(self):
        f = uniform_prior(0.0, 1.0)
        assert gamma_prob(f, 0.25, 0.7) == pytest.approx(0.6, abs=1e-12)

    def test_uninformative_accuracy(self):
        f = uniform_prior(0.0, 1.0)
        for x in (0.1, 0.5, 0.93):
            assert gamma_prob(f, x, 0.5) == pytest.approx(0.5, abs=1e-15)


class TestStepUpdate:
    def test_positive_response_scales_right(self):
        f = step_update(uniform_prior(0.0, 1.0), 0.5, +1, 0.7)
        np.testing.assert_allclose(_heights(f), [0.6, 1.4], rtol=1e-12)

    def test_negative_response_mirrors(self):
        f = step_update(uniform_prior(0.0, 1.0), 0.5, -1, 0.7)
        np.testing.assert_allclose(_heights(f), [1.4, 0.6], rtol=1e-12)

    def test_uninformative_is_identity(self):
        f = step_update(uniform_prior(0.0, 1.0), 0.42, +1, 0.5)
        np.testing.assert_allclose(_heights(f), [1.0, 1.0], atol=1e-14)

    def test_democratic_oracle_enforced(self):
        with pytest.raises(ValueError):
            step_update(uniform_prior(0.0, 1.0), 0.5, +1, 0.49)

    def test_invalid_response_value(self):
        with pytest.raises(ValueError):
            step_update(uniform_prior(0.0, 1.0), 0.5, 0, 0.7)


class TestBatchedUpdate:
    def test_unanimous_pair(self):
        f = batched_update(uniform_prior(0.0, 1.0), 0.5, 2, 2, 0.7)
        np.testing.assert_allclose(
            _heights(f), [0.09 / 0.29, 0.49 / 0.29], rtol=1e-12
        )

    def test_balanced_count_is_identity(self):
        f = batched_update(uniform_prior(0.0, 1.0), 0.3, 5, 10, 0.8)
        np.testing.assert_allclose(_heights(f), [1.0, 1.0], atol=1e-14)

    def test_single_response_reduces_to_step(self):
        f1 = batched_update(uniform_prior(0.0, 1.0), 0.4, 1, 1, 0.73)
        f2 = step_update(uniform_prior(0.0, 1.0), 0.4, +1, 0.73)
        np.testing.assert_allclose(f1.log_heights, f2.log_heights, atol=1e-14)

    def test_matches_composed_single_steps(self):
        # spot check; the acceptance suite sweeps K <= 20 exhaustively
        for k, b, p in [(5, 4, 0.7), (12, 3, 0.55), (20, 20, 0.9)]:
            batched = batched_update(uniform_prior(0.0, 1.0), 0.37, b, k, p)
            seq = uniform_prior(0.0, 1.0)
            for i in range(k):
                seq = step_update(seq, 0.37, +1 if i < b else -1, p)
            xs = np.linspace(0.001, 0.999, 513)
            np.testing.assert_allclose(
                np.exp(batched.log_heights[np.searchsorted(batched.knots, xs) - 1]),
                np.exp(seq.log_heights[np.searchsorted(seq.knots, xs) - 1]),
                atol=1e-10,
            )

    def test_majority_moves_mass_toward_majority(self):
        f0 = uniform_prior(0.0, 1.0)
        up = batched_update(f0, 0.5, 8, 10, 0.8)
        down = batched_update(f0, 0.5, 2, 10, 0.8)
        assert 1.0 - up.cdf_at(0.5) > 0.5
        assert 1.0 - down.cdf_at(0.5) < 0.5

    def test_count_larger_than_batch_rejected(self):
        with pytest.raises(ValueError):
            batched_update(uniform_prior(0.0, 1.0), 0.5, 3, 2, 0.7)

    def test_degenerate_outside_mass(self):
        f = uniform_prior(0.0, 1.0).apply_split_scaling(0.5, 0.0, -np.inf)
        with pytest.raises(DegenerateUpdateError):
            batched_update(f, 0.25, 2, 3, 0.7)

    def test_updates_commute_with_known_accuracy(self):
        f0 = uniform_prior(0.0, 1.0)
        a = batched_update(batched_update(f0, 0.3, 4, 5, 0.8), 0.7, 1, 5, 0.6)
        b = batched_update(batched_update(f0, 0.7, 1, 5, 0.6), 0.3, 4, 5, 0.8)
        np.testing.assert_allclose(a.log_heights, b.log_heights, atol=1e-12)
        np.testing.assert_array_equal(a.knots, b.knots)


class TestRightScalingFactor:
    def test_unanimous_pair_value(self):
        r = right_scaling_factor(uniform_prior(0.0, 1.0), 0.5, 2, 2, 0.7)
        assert r == pytest.approx(0.49 / 0.29, rel=1e-12)

    def test_balanced_is_one(self):
        r = right_scaling_factor(uniform_prior(0.0, 1.0), 0.5, 3, 6, 0.9)
        assert r == pytest.approx(1.0, abs=1e-14)

    def test_certain_accuracy_inverse_tail_mass(self):
        r = right_scaling_factor(uniform_prior(0.0, 1.0), 0.5, 4, 4, 1.0)
        assert r == pytest.approx(2.0, rel=1e-12)

    def test_factor_exceeds_one_iff_majority_positive(self):
        f = uniform_prior(0.0, 1.0)
        assert right_scaling_factor(f, 0.4, 9, 10, 0.8) > 1.0
        assert right_scaling_factor(f, 0.4, 1, 10, 0.8) < 1.0


class TestBoostedUpdate:
    def test_positive_direction_height(self):
        sig = UpdateSignal("boosted-binary", p_hat=0.784, direction=+1)
        f = boosted_update(uniform_prior(0.0, 1.0), 0.5, sig)
        np.testing.assert_allclose(_heights(f), [0.432, 1.568], rtol=1e-12)

    def test_uninformative_is_identity(self):
        sig = UpdateSignal("boosted-binary", p_hat=0.5, direction=+1)
        f = boosted_update(uniform_prior(0.0, 1.0), 0.5, sig)
        np.testing.assert_allclose(_heights(f), [1.0, 1.0], atol=1e-14)

    def test_directions_mirror(self):
        up = boosted_update(
            uniform_prior(0.0, 1.0),
            0.5,
            UpdateSignal("boosted-binary", p_hat=0.9, direction=+1),
        )
        down = boosted_update(
            uniform_prior(0.0, 1.0),
            0.5,
            UpdateSignal("boosted-binary", p_hat=0.9, direction=-1),
        )
        np.testing.assert_allclose(
            _heights(up), _heights(down)[::-1], rtol=1e-12
        )


class TestApplyUpdate:
    def test_dispatch_batched(self):
        sig = UpdateSignal("batched-counts", p_hat=0.7, b_k=2, k=2)
        f = apply_update(uniform_prior(0.0, 1.0), 0.5, sig)
        np.testing.assert_allclose(_heights(f)[1], 0.49 / 0.29, rtol=1e-12)

    def test_dispatch_boosted(self):
        sig = UpdateSignal("boosted-binary", p_hat=0.7, direction=-1)
        f = apply_update(uniform_prior(0.0, 1.0), 0.5, sig)
        np.testing.assert_allclose(_heights(f), [1.4, 0.6], rtol=1e-12)


class TestUpdateProperties:
    @given(
        st.integers(min_value=1, max_value=20),
        st.floats(min_value=0.5, max_value=0.99),
        st.floats(min_value=0.05, max_value=0.95),
        st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_mass_stays_one(self, k, p, x, data):
        b = data.draw(st.integers(min_value=0, max_value=k))
        f = batched_update(uniform_prior(0.0, 1.0), x, b, k, p)
        assert abs(f.mass() - 1.0) <= 1e-12

    @given(
        st.integers(min_value=2, max_value=20),
        st.floats(min_value=0.05, max_value=0.95),
        st.data(),
    )
    @settings(max_examples=40, deadline=None)
    def test_half_accuracy_fixed_point(self, k, x, data):
        b = data.draw(st.integers(min_value=0, max_value=k))
        f = batched_update(uniform_prior(0.0, 1.0), x, b, k, 0.5)
        np.testing.assert_allclose(np.exp(f.log_heights), 1.0, atol=1e-12)
