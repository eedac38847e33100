"""
Integration tests for complete selection studies

End-to-end runs of the synthetic and real-data workflows. The slow classes
run full-size studies (10,000 observations per split) and check the
orderings and bands the selected models must meet; run them with
``pytest -m slow``.
"""

import numpy as np
import pytest

from distributions import fit_beta_mle, histogram, kl_divergence, ks_distance
from learners import fit_logistic
from metrics import auc, ici
from models import DgpSpec, LearnerKind
from selection_harness import StudyConfig, real_data_study, replicate
from synthetic_dgp import generate, resample_iterative
from tabular_data import export_sample_csv, load_csv, load_schema, split


def _mean_test(result, model, metric):
    frame = result.replication_frame()
    return float(frame.loc[frame["model"] == model, metric].mean())


# ============================================================================
# WORKFLOWS
# ============================================================================

@pytest.mark.integration
class TestWorkflows:

    def test_boost_study_selects_round_counts(self):
        study = StudyConfig(learner="boost", dgp=1, n=300, reps=2, seed=2, criteria=("auc", "kl"),
                            grid={"max_depth": [1, 2], "n_rounds": 15})
        result = replicate(study, workers=2)
        for report in result.reports:
            assert report.learner is LearnerKind.BOOST
            assert 1 <= report.row("KL*").point.n_rounds <= 15
            assert report.row("smallest").leaf_count <= report.row("largest").leaf_count

    def test_forest_study_on_noisy_dgp3(self):
        study = StudyConfig(learner="forest", dgp=3, noise=10, n=200, reps=1, seed=4,
                            grid={"mtry": [2, 6], "min_bucket": [10, 60]}, n_trees=10)
        report = replicate(study, workers=2).reports[0]
        assert {row.point.mtry for row in report} <= {2, 6}
        assert report.row("MSE*").test.mse_vs_truth is not None

    def test_resampled_dgp4_study(self):
        study = StudyConfig(dgp=4, dgp4_resample=True, n=300, reps=1, seed=6, criteria=("kl",),
                            grid={"min_bucket": [10, 40]}, include_extremes=False)
        result = replicate(study, workers=1)
        assert [row.name for row in result.reports[0]] == ["KL*"]

    def test_real_data_from_exported_csv(self, tmp_path):
        sample = generate(DgpSpec(3, seed=8), 2000)
        csv_path, schema_path = export_sample_csv(sample, tmp_path / "real.csv", include_true_prob=False)
        dataset = load_csv(csv_path, load_schema(schema_path))

        report = real_data_study(dataset, grid=None, seed=8, include_extremes=True, workers=2)
        names = [row.name for row in report]
        assert names[-1] == "GLM"
        assert {"smallest", "largest"} <= set(names)
        # the largest tree's spiky scores sit far from the prior
        assert report.row("KL*").test.kl < report.row("largest").test.kl
        assert report.validation_deltas["kl"] <= 0.0
        assert np.isfinite(report.prior.alpha) and np.isfinite(report.prior.beta)


# ============================================================================
# FULL-SIZE STUDIES
# ============================================================================

@pytest.mark.integration
@pytest.mark.slow
class TestTreeStudyOrdering:

    @pytest.fixture(scope="class")
    def dgp1_study(self):
        study = StudyConfig(dgp=1, n=10_000, reps=10, seed=1)
        return replicate(study)

    def test_row_layout(self, dgp1_study):
        summary = dgp1_study.summary_frame()
        assert summary["model"].tolist() == ["MSE*", "AUC*", "BRIER*", "ICI*", "KL*", "smallest", "largest"]
        assert (summary["replications"] == 10).all()

    def test_kl_star_beats_auc_star_on_kl(self, dgp1_study):
        assert _mean_test(dgp1_study, "KL*", "kl") < _mean_test(dgp1_study, "AUC*", "kl")

    def test_kl_star_gives_up_little_auc(self, dgp1_study):
        assert _mean_test(dgp1_study, "AUC*", "auc") - _mean_test(dgp1_study, "KL*", "auc") <= 0.02

    def test_smallest_tree_kl_band(self, dgp1_study):
        assert 1.2 <= _mean_test(dgp1_study, "smallest", "kl") <= 2.4

    def test_largest_tree_overdisperses_scores(self, dgp1_study):
        assert _mean_test(dgp1_study, "largest", "qr") > 1.3

    def test_kl_star_beats_the_largest_tree_on_kl(self, dgp1_study):
        assert _mean_test(dgp1_study, "KL*", "kl") < _mean_test(dgp1_study, "largest", "kl")

    def test_mse_star_beats_the_extremes_on_mse(self, dgp1_study):
        best = _mean_test(dgp1_study, "MSE*", "mse")
        assert best < _mean_test(dgp1_study, "largest", "mse")
        assert best < _mean_test(dgp1_study, "smallest", "mse")

    def test_auc_star_beats_the_smallest_tree_on_auc(self, dgp1_study):
        assert _mean_test(dgp1_study, "AUC*", "auc") > _mean_test(dgp1_study, "smallest", "auc")

    def test_kl_star_scores_resemble_the_truth(self, dgp1_study):
        report = dgp1_study.reports[0]
        kl_hist = report.histograms["KL*"].proportions
        reference = report.histograms["reference"].proportions
        assert np.abs(kl_hist - reference).sum() < np.abs(report.histograms["largest"].proportions
                                                           - reference).sum()

    def test_dgp2_probabilities_are_skewed(self):
        p = generate(DgpSpec(2, seed=1), 5000).dataset.true_prob
        uniform_gap = ks_distance(p, lambda t: t)
        assert np.median(p) < 0.25
        assert uniform_gap > 0.2


NOISY_FOREST_BUCKETS = [2, 8, 32, 128, 512, 2048, 8192]


@pytest.mark.integration
@pytest.mark.slow
class TestNoiseSensitivity:
    """DGP1 with 100 noise columns, forests against boosting."""

    @pytest.fixture(scope="class")
    def forest_study(self):
        study = StudyConfig(learner="forest", dgp=1, noise=100, n=10_000, reps=5, seed=1,
                            criteria=("auc", "kl"), grid={"min_bucket": NOISY_FOREST_BUCKETS},
                            n_trees=100, include_extremes=False)
        return replicate(study)

    @pytest.fixture(scope="class")
    def boost_study(self):
        study = StudyConfig(learner="boost", dgp=1, noise=100, n=10_000, reps=5, seed=1,
                            criteria=("auc", "kl"), include_extremes=False)
        return replicate(study)

    def test_forest_auc_star_compresses_scores(self, forest_study):
        assert _mean_test(forest_study, "AUC*", "qr") <= 0.75

    def test_forest_kl_star_lowers_kl(self, forest_study):
        assert forest_study.delta_frame()["kl"].mean() < 0.0

    def test_boost_kl_star_matches_spread(self, boost_study):
        assert 0.9 <= _mean_test(boost_study, "KL*", "qr") <= 1.1


@pytest.mark.integration
@pytest.mark.slow
class TestRealDataDeltas:

    def test_kl_star_holds_up_on_the_test_split(self, tmp_path):
        sample = generate(DgpSpec(3, seed=30), 30_000)
        csv_path, schema_path = export_sample_csv(sample, tmp_path / "standin.csv", include_true_prob=False)
        dataset = load_csv(csv_path, load_schema(schema_path))

        report = real_data_study(dataset, seed=30)
        assert np.isfinite(report.prior.alpha) and np.isfinite(report.prior.beta)
        assert report.validation_deltas["kl"] <= 0.0
        assert report.deltas["kl"] <= 0.05


@pytest.mark.integration
@pytest.mark.slow
class TestLargeSampleBehaviour:

    def test_logistic_model_is_calibrated_on_dgp1(self):
        data = generate(DgpSpec(1, seed=21), 100_000).dataset
        parts = split(data, (0.5, 0.25, 0.25), seed=21)
        train, test = data.subset(parts.train), data.subset(parts.test)
        scores = fit_logistic(train).predict(test.features)

        assert ici(scores, test.target) <= 0.02
        reference = histogram(test.true_prob, 20)
        assert kl_divergence(histogram(scores, 20), reference) <= 0.05
        assert 0.73 <= auc(scores, test.target) <= 0.79

    def test_iterative_resampling_of_a_large_dgp4_draw(self):
        prior = fit_beta_mle(generate(DgpSpec(1, seed=2), 100_000).dataset.true_prob)
        pool = generate(DgpSpec(4, seed=2), 100_000).dataset.true_prob
        result = resample_iterative(pool, prior.pdf, prior.cdf, epsilon=0.05, seed=2)
        assert result.ks_distance <= 0.05
        assert result.size >= 1000
