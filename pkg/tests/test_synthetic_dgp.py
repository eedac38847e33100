"""
Unit tests for synthetic data-generating processes and resamplers
"""

import numpy as np
import pytest
from scipy import special, stats

import config
from distributions import beta_kernel_density, fit_beta_mle, ks_distance
from errors import ParameterError, ResamplingError
from models import DgpSpec
from synthetic_dgp import generate, generate_resampled_dgp4, resample_iterative, resample_rejection

BETA22 = stats.beta(2.0, 2.0)


# ============================================================================
# GENERATION
# ============================================================================

@pytest.mark.unit
class TestGenerate:

    def test_dgp1_probabilities_follow_the_logistic_link(self):
        ds = generate(DgpSpec(1, seed=3), 500).dataset
        expected = special.expit(0.5 * ds.features[:, 0] + 1.0 * ds.features[:, 1])
        assert np.allclose(ds.true_prob, expected)

    def test_dgp2_cubes_dgp1(self):
        p1 = generate(DgpSpec(1, seed=8), 2000).dataset.true_prob
        p2 = generate(DgpSpec(2, seed=8), 2000).dataset.true_prob
        assert np.allclose(p2, p1 ** 3)
        assert p2.mean() < p1.mean()

    def test_noise_columns_are_appended(self):
        ds = generate(DgpSpec(1, n_noise=10, seed=1), 50).dataset
        assert ds.n_features == 12
        assert ds.feature_names[:3] == ("x1", "x2", "noise1")
        assert ds.feature_names[-1] == "noise10"

    def test_dgp3_one_hot_groups(self):
        ds = generate(DgpSpec(3, seed=2), 400).dataset
        assert ds.n_features == 5 + sum(config.DGP3_CATEGORICAL_LEVELS)
        assert [len(g.levels) for g in ds.categorical_groups] == list(config.DGP3_CATEGORICAL_LEVELS)
        for group in ds.categorical_groups:
            block = ds.features[:, list(group.columns)]
            assert np.all(block.sum(axis=1) == 1.0)

    def test_dgp3_eta_uses_level_numbers(self):
        ds = generate(DgpSpec(3, seed=6), 300).dataset
        eta = ds.features[:, :5] @ np.asarray(config.DGP3_CONTINUOUS_COEFFICIENTS)
        for group, coef in zip(ds.categorical_groups, config.DGP3_CATEGORICAL_COEFFICIENTS):
            level = ds.features[:, list(group.columns)].argmax(axis=1) + 1
            eta = eta + coef * level
        assert np.allclose(ds.true_prob, special.expit(eta))

    def test_dgp4_nonlinear_terms(self):
        spec = DgpSpec(4, seed=5, quadratic_coef=0.7, interaction_coef=-0.2)
        ds = generate(spec, 300).dataset
        x1, x2, x3 = ds.features.T
        eta = 0.5 * x1 + 1.0 * x2 + 0.3 * x3 + 0.7 * x1 ** 2 - 0.2 * x2 * x3
        assert np.allclose(ds.true_prob, special.expit(eta))

    def test_same_seed_reproduces_sample(self):
        a = generate(DgpSpec(3, n_noise=10, seed=11), 100).dataset
        b = generate(DgpSpec(3, n_noise=10, seed=11), 100).dataset
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.target, b.target)

    def test_outcomes_match_probabilities_on_average(self):
        ds = generate(DgpSpec(1, seed=12), 20_000).dataset
        assert ds.target.mean() == pytest.approx(ds.true_prob.mean(), abs=0.015)

    def test_n_must_be_positive(self):
        with pytest.raises(ParameterError):
            generate(DgpSpec(1), 0)


# ============================================================================
# REJECTION RESAMPLING
# ============================================================================

@pytest.mark.unit
class TestResampleRejection:

    def test_reshapes_uniform_toward_target(self, rng):
        scores = rng.random(5000)
        result = resample_rejection(scores, BETA22.pdf, BETA22.cdf, seed=1)
        assert result.envelope >= 1.0
        assert 0 < result.size < scores.size
        assert result.ks_distance < 0.05
        assert result.ks_distance < ks_distance(scores, BETA22.cdf)

    def test_acceptance_favours_high_target_density(self, rng):
        # Beta(5, 2) has mean 5/7; keeping by g / phi pulls a uniform sample up
        skewed = stats.beta(5.0, 2.0)
        scores = rng.random(5000)
        kept = scores[resample_rejection(scores, skewed.pdf, skewed.cdf, seed=6).indices]
        assert kept.mean() > 0.65
        assert np.mean(kept > 0.5) > np.mean(scores > 0.5)

        iterated = resample_iterative(scores, skewed.pdf, skewed.cdf, epsilon=0.1, seed=6)
        assert scores[iterated.indices].mean() > 0.65

    def test_survivors_are_sorted_input_indices(self, rng):
        scores = rng.random(1000)
        result = resample_rejection(scores, BETA22.pdf, BETA22.cdf, seed=2)
        assert np.all(np.diff(result.indices) > 0)
        assert result.indices.max() < scores.size

    def test_self_target_keeps_about_one_over_c(self, rng):
        scores = rng.beta(2.0, 3.0, size=2000)
        own_density = beta_kernel_density(scores)
        result = resample_rejection(scores, own_density, stats.beta(2.0, 3.0).cdf, seed=4)
        keep = 1.0 / result.envelope
        sigma = np.sqrt(scores.size * keep * (1.0 - keep))
        assert result.envelope == pytest.approx(1.0)
        assert abs(result.size - scores.size * keep) <= 3.0 * sigma + 1.0

    def test_envelope_above_limit_points_to_iterative_resampler(self, rng):
        narrow = stats.beta(50.0, 50.0)
        with pytest.raises(ResamplingError, match="iterative") as excinfo:
            resample_rejection(rng.random(1000), narrow.pdf, narrow.cdf, c_max=2.0)
        assert excinfo.value.diagnostics["c"] > 2.0


@pytest.mark.unit
class TestResampleIterative:

    def test_reaches_tolerance(self, rng):
        scores = rng.random(5000)
        result = resample_iterative(scores, BETA22.pdf, BETA22.cdf, epsilon=0.05, seed=3)
        assert result.ks_distance <= 0.05
        assert result.trace[0] == pytest.approx(ks_distance(scores, BETA22.cdf))
        assert result.trace[-1] == result.ks_distance
        assert result.iterations == len(result.trace) - 1

    def test_already_close_sample_is_kept_whole(self, rng):
        scores = rng.beta(2.0, 2.0, size=3000)
        result = resample_iterative(scores, BETA22.pdf, BETA22.cdf, epsilon=0.5, seed=3)
        assert result.size == scores.size
        assert result.iterations == 0

    @pytest.mark.parametrize("epsilon", [0.0, -0.1, 0.6])
    def test_epsilon_range(self, rng, epsilon):
        with pytest.raises(ParameterError, match="epsilon"):
            resample_iterative(rng.random(500), BETA22.pdf, BETA22.cdf, epsilon=epsilon)

    def test_sample_too_small(self, rng):
        with pytest.raises(ParameterError, match="at least"):
            resample_iterative(rng.random(50), BETA22.pdf, BETA22.cdf, epsilon=0.05)

    def test_survivor_floor_reports_best_distance(self, rng):
        scores = rng.random(500)
        with pytest.raises(ResamplingError) as excinfo:
            resample_iterative(scores, BETA22.pdf, BETA22.cdf, epsilon=0.001, floor=499)
        diagnostics = excinfo.value.diagnostics
        assert diagnostics["best_ks"] == pytest.approx(ks_distance(scores, BETA22.cdf))
        assert diagnostics["survivors"] < 499

    def test_iteration_cap(self, rng):
        with pytest.raises(ResamplingError, match="after 0 passes"):
            resample_iterative(rng.random(500), BETA22.pdf, BETA22.cdf, epsilon=0.001, max_iterations=0)


@pytest.mark.unit
class TestResampledDgp4:

    def test_probabilities_move_toward_dgp1(self):
        spec = DgpSpec(4, seed=7)
        resampled = generate_resampled_dgp4(spec, 1000, epsilon=0.05, reference_size=20_000)
        assert resampled.dataset.n == 1000

        prior = fit_beta_mle(generate(DgpSpec(1, seed=7), 20_000).dataset.true_prob)
        raw = generate(spec, 1000).dataset.true_prob
        shifted = abs(resampled.dataset.true_prob.mean() - prior.mean)
        assert shifted < abs(raw.mean() - prior.mean)
        assert ks_distance(resampled.dataset.true_prob, prior.cdf) < 0.1

    def test_only_for_dgp4(self):
        with pytest.raises(ParameterError, match="DGP4"):
            generate_resampled_dgp4(DgpSpec(1), 100)
