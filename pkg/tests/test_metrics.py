"""
Unit tests for metrics module

AUC, Brier score, MSE against the truth, quantile ratio, calibration curve,
ICI and the bundled metric table. Property tests check the invariances the
metrics are defined by.
"""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from distributions import histogram
from errors import DimensionError, DomainError, ParameterError
from metrics import (
    auc,
    brier,
    calibration_curve,
    compute_metric_table,
    ici,
    ici_details,
    mse_vs_truth,
    quantile_ratio,
)

# scores on a 0.001 lattice so monotone maps cannot merge neighbouring values
scores_strategy = arrays(np.float64, st.integers(min_value=4, max_value=60),
                         elements=st.integers(min_value=0, max_value=1000).map(lambda k: k / 1000))


# ============================================================================
# DISCRIMINATION AND ACCURACY
# ============================================================================

@pytest.mark.unit
class TestAuc:

    def test_worked_example(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_ties_count_half(self):
        assert auc([0.5, 0.5], [0, 1]) == pytest.approx(0.5)

    def test_perfect_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_single_class(self):
        with pytest.raises(DomainError, match="single class"):
            auc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            auc([0.1, 0.2, 0.3], [0, 1])

    @given(scores_strategy, st.data())
    @settings(max_examples=60)
    def test_invariant_under_strictly_increasing_maps(self, scores, data):
        labels = np.array(data.draw(st.lists(st.sampled_from([0.0, 1.0]),
                                             min_size=scores.size, max_size=scores.size)))
        assume(0 < labels.sum() < labels.size)
        expected = auc(scores, labels)
        assert auc(scores ** 3, labels) == pytest.approx(expected)
        assert auc(np.sqrt(scores) * 0.5 + 0.1, labels) == pytest.approx(expected)


@pytest.mark.unit
class TestBrierAndMse:

    def test_brier_of_constant_base_rate(self):
        labels = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0], dtype=float)
        p = labels.mean()
        assert brier(np.full(labels.size, p), labels) == pytest.approx(p * (1 - p))

    def test_brier_perfect(self):
        assert brier([0.0, 1.0], [0, 1]) == 0.0

    def test_mse_vs_truth(self):
        assert mse_vs_truth([0.2, 0.6], np.array([0.1, 0.8])) == pytest.approx((0.01 + 0.04) / 2)

    def test_mse_without_truth(self):
        with pytest.raises(DomainError, match="true probabilities"):
            mse_vs_truth([0.2], None)


@pytest.mark.unit
class TestQuantileRatio:

    def test_identical_samples_give_one(self, rng):
        values = rng.random(500)
        assert quantile_ratio(values, values) == pytest.approx(1.0)

    @given(scores_strategy, st.floats(min_value=0.05, max_value=1.0), st.floats(min_value=-0.5, max_value=0.5))
    @settings(max_examples=60)
    def test_affine_equivariance(self, scores, scale, shift):
        reference = np.linspace(0.0, 1.0, 101)
        base = quantile_ratio(scores, reference)
        assert quantile_ratio(scale * scores + shift, reference) == pytest.approx(scale * base, abs=1e-9)

    def test_zero_reference_spread(self):
        with pytest.raises(DomainError, match="zero"):
            quantile_ratio([0.1, 0.9], [0.5] * 20)

    def test_narrow_scores_below_one(self, rng):
        reference = rng.beta(2.0, 2.0, size=2000)
        narrow = 0.5 + 0.2 * (reference - 0.5)
        assert quantile_ratio(narrow, reference) == pytest.approx(0.2)


# ============================================================================
# CALIBRATION
# ============================================================================

@pytest.mark.unit
class TestCalibrationCurve:

    def test_quantile_bins_hold_equal_counts(self, calibrated_pairs):
        scores, labels = calibrated_pairs
        curve = calibration_curve(scores, labels, n_bins=10)
        assert curve.bin_count == 10
        assert not curve.merged
        assert curve.counts.sum() == scores.size
        assert np.all(np.abs(curve.counts - scores.size / 10) <= 1)

    def test_calibrated_scores_track_the_diagonal(self, calibrated_pairs):
        curve = calibration_curve(*calibrated_pairs, n_bins=10)
        # outer bins are wide, so their midpoints sit away from the mean score
        interior = np.abs(curve.bin_centers - curve.mean_observed)[1:-1]
        assert np.all(interior < 0.07)
        assert curve.max_deviation() < 0.1

    def test_ties_merge_bins(self):
        scores = np.array([0.2] * 50 + [0.8] * 50)
        labels = np.array([0, 1] * 50, dtype=float)
        curve = calibration_curve(scores, labels, n_bins=10)
        assert curve.merged
        assert curve.bin_count < 10
        assert curve.counts.sum() == 100

    def test_bin_count_bounds(self):
        with pytest.raises(ParameterError):
            calibration_curve([0.1, 0.2, 0.3], [0, 1, 0], n_bins=5)
        with pytest.raises(ParameterError):
            calibration_curve([0.1, 0.2, 0.3], [0, 1, 0], n_bins=1)


@pytest.mark.unit
class TestIci:

    def test_calibrated_scores_have_small_ici(self, calibrated_pairs):
        assert ici(*calibrated_pairs) < 0.02

    def test_shrunk_scores_have_larger_ici(self, calibrated_pairs):
        scores, labels = calibrated_pairs
        shrunk = 0.5 + 0.3 * (scores - 0.5)
        assert ici(shrunk, labels) > ici(scores, labels) + 0.05

    def test_constant_scores_use_label_mean(self):
        labels = np.array([1.0] * 30 + [0.0] * 70)
        estimate = ici_details(np.full(100, 0.5), labels)
        assert estimate.degenerate
        assert estimate.value == pytest.approx(0.2)

    def test_small_sample_direct_path_matches_grid_path_closely(self, rng):
        scores = rng.beta(2.0, 2.0, size=1500)
        labels = (rng.random(scores.size) < scores).astype(float)
        gridded = ici(scores, labels)
        direct = ici(scores[:999], labels[:999])
        assert abs(gridded - direct) < 0.03

    def test_needs_twenty_observations(self):
        with pytest.raises(ParameterError, match="at least"):
            ici(np.linspace(0.1, 0.9, 10), [0, 1] * 5)

    def test_scores_outside_unit_interval(self):
        with pytest.raises(DomainError):
            ici(np.linspace(-0.1, 0.9, 30), [0, 1] * 15)


# ============================================================================
# METRIC TABLE
# ============================================================================

@pytest.mark.unit
class TestComputeMetricTable:

    def test_truth_as_scores(self, dgp1_sample):
        ds = dgp1_sample.dataset
        reference = histogram(ds.true_prob, 20)
        table = compute_metric_table(ds.true_prob, ds.target, reference, ds.true_prob, true_prob=ds.true_prob)
        assert table.mse_vs_truth == 0.0
        assert table.kl == pytest.approx(0.0, abs=1e-12)
        assert table.qr == pytest.approx(1.0)
        assert 0.5 < table.auc < 1.0

    def test_mse_absent_without_truth(self, calibrated_pairs):
        scores, labels = calibrated_pairs
        table = compute_metric_table(scores, labels, histogram(scores, 20), scores)
        assert table.mse_vs_truth is None
        assert table.get("mse") is None

    def test_scores_are_clipped(self, calibrated_pairs):
        scores, labels = calibrated_pairs
        shifted = scores * 1.1
        table = compute_metric_table(shifted, labels, histogram(scores, 20), scores)
        assert np.isfinite(table.kl)
