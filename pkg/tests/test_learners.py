"""
Unit tests for learners module

CART splitting against a brute-force oracle, tree controls, forests,
stagewise boosting, IRLS logistic regression and JSON serialization.
"""

import numpy as np
import pytest
from scipy import special

from errors import CollinearityError, DimensionError, ParameterError, RangeError
from learners import (
    _best_split,
    check_full_rank,
    fit_boost,
    fit_forest,
    fit_logistic,
    fit_tree,
    gradient_check,
    logistic_design,
    model_from_json,
    model_to_json,
    predict_boost,
    predict_tree,
)
from models import BoostParams, Dataset, ForestParams, TreeParams


def _sse(values: np.ndarray) -> float:
    return float(np.sum((values - values.mean()) ** 2)) if values.size else 0.0


def _brute_force_gain(X, y, min_bucket):
    """Largest SSE reduction over every feature and midpoint threshold."""
    parent = _sse(y)
    best = -np.inf
    for j in range(X.shape[1]):
        values = np.unique(X[:, j])
        for lower, upper in zip(values[:-1], values[1:]):
            left = X[:, j] < (lower + upper) / 2.0
            if left.sum() < min_bucket or (~left).sum() < min_bucket:
                continue
            best = max(best, parent - _sse(y[left]) - _sse(y[~left]))
    return best


def _split_gain(X, y, feature, threshold):
    left = X[:, feature] < threshold
    return _sse(y) - _sse(y[left]) - _sse(y[~left])


# ============================================================================
# REGRESSION TREE
# ============================================================================

@pytest.mark.unit
class TestBestSplit:

    @pytest.mark.parametrize("fixture_seed", range(50))
    def test_matches_brute_force_oracle(self, fixture_seed):
        rng = np.random.default_rng(fixture_seed)
        X = rng.standard_normal((20, 3))
        y = rng.standard_normal(20)
        min_bucket = int(rng.integers(1, 5))
        params = TreeParams(min_bucket=min_bucket, min_split=2)

        found = _best_split(X, y, np.arange(20), np.arange(3), params, min_gain=0.0)
        assert found is not None
        feature, threshold = found
        assert _split_gain(X, y, feature, threshold) == pytest.approx(
            _brute_force_gain(X, y, min_bucket), rel=1e-9, abs=1e-12
        )

    def test_ties_go_to_lowest_feature(self):
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        feature, threshold = _best_split(X, y, np.arange(4), np.arange(2), TreeParams(1, min_split=2), 0.0)
        assert (feature, threshold) == (0, 0.5)

    def test_constant_feature_cannot_split(self):
        X = np.ones((6, 1))
        y = np.array([0, 1, 0, 1, 0, 1], dtype=float)
        assert _best_split(X, y, np.arange(6), np.arange(1), TreeParams(1, min_split=2), 0.0) is None


@pytest.mark.unit
class TestFitTree:

    def test_separable_data_gives_two_pure_leaves(self, tiny_dataset):
        tree = fit_tree(tiny_dataset, TreeParams(min_bucket=1, min_split=2))
        assert tree.leaf_count == 2
        assert tree.predict(tiny_dataset.features).tolist() == tiny_dataset.target.tolist()
        assert predict_tree(tree, np.array([0.25, 9.0])) == 0.0

    def test_min_bucket_larger_than_half_gives_single_leaf(self, tiny_dataset):
        tree = fit_tree(tiny_dataset, TreeParams(min_bucket=4))
        assert tree.leaf_count == 1
        assert np.allclose(tree.predict(tiny_dataset.features), 0.5)

    def test_leaves_respect_min_bucket(self, dgp1_splits):
        train, _, _ = dgp1_splits
        tree = fit_tree(train, TreeParams(min_bucket=40))
        leaf_sizes = tree.count[tree.is_leaf]
        assert leaf_sizes.min() >= 40
        assert leaf_sizes.sum() == train.n

    def test_larger_min_bucket_never_adds_leaves(self, dgp1_splits):
        train, _, _ = dgp1_splits
        leaves = [fit_tree(train, TreeParams(min_bucket=mb)).leaf_count for mb in (5, 20, 80, 320)]
        assert leaves == sorted(leaves, reverse=True)

    def test_max_depth_limits_leaves(self, dgp1_splits):
        train, _, _ = dgp1_splits
        assert fit_tree(train, TreeParams(min_bucket=1, max_depth=2)).leaf_count <= 4

    def test_complexity_penalty_prunes(self, dgp1_splits):
        train, _, _ = dgp1_splits
        loose = fit_tree(train, TreeParams(min_bucket=5))
        strict = fit_tree(train, TreeParams(min_bucket=5, complexity_penalty=0.01))
        assert strict.leaf_count < loose.leaf_count

    def test_scores_lie_in_unit_interval(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        tree = fit_tree(train, TreeParams(min_bucket=50))
        scores = tree.predict(valid.features)
        assert scores.min() >= 0.0 and scores.max() <= 1.0

    def test_width_mismatch(self, tiny_dataset):
        tree = fit_tree(tiny_dataset, TreeParams(min_bucket=1, min_split=2))
        with pytest.raises(DimensionError):
            tree.predict(np.zeros((2, 3)))


# ============================================================================
# RANDOM FOREST
# ============================================================================

@pytest.mark.unit
class TestForest:

    def test_independent_of_worker_count(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        params = ForestParams(mtry=1, min_bucket=20, n_trees=8, seed=5)
        one = fit_forest(train, params, workers=1)
        four = fit_forest(train, params, workers=4)
        assert np.array_equal(one.predict(valid.features), four.predict(valid.features))

    def test_seed_changes_forest(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        a = fit_forest(train, ForestParams(mtry=1, min_bucket=20, n_trees=4, seed=1), workers=1)
        b = fit_forest(train, ForestParams(mtry=1, min_bucket=20, n_trees=4, seed=2), workers=1)
        assert not np.array_equal(a.predict(valid.features), b.predict(valid.features))

    def test_prediction_is_tree_average(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        forest = fit_forest(train, ForestParams(mtry=2, min_bucket=30, n_trees=3), workers=1)
        expected = np.mean([tree.predict(valid.features) for tree in forest.trees], axis=0)
        assert np.allclose(forest.predict(valid.features), expected)
        assert forest.leaf_count == pytest.approx(np.mean([t.leaf_count for t in forest.trees]))

    def test_mtry_above_feature_count(self, dgp1_splits):
        train, _, _ = dgp1_splits
        with pytest.raises(ParameterError, match="mtry"):
            fit_forest(train, ForestParams(mtry=3, min_bucket=5, n_trees=2))


# ============================================================================
# BOOSTING
# ============================================================================

@pytest.mark.unit
class TestBoost:

    @pytest.fixture
    def boost_model(self, dgp1_splits):
        train, _, _ = dgp1_splits
        return fit_boost(train, BoostParams(max_depth=2, n_rounds=25))

    def test_staged_predictions_match_truncated_models(self, boost_model, dgp1_splits):
        _, valid, _ = dgp1_splits
        staged = boost_model.staged_predict(valid.features)
        assert staged.shape == (25, valid.n)
        for at_round in (1, 7, 25):
            assert np.allclose(staged[at_round - 1], predict_boost(boost_model, valid.features, at_round))

    def test_round_out_of_range(self, boost_model, dgp1_splits):
        _, valid, _ = dgp1_splits
        with pytest.raises(RangeError):
            boost_model.predict(valid.features, at_round=26)
        with pytest.raises(RangeError):
            boost_model.predict(valid.features, at_round=0)

    def test_leaf_count_accumulates(self, boost_model):
        assert boost_model.leaf_count(1) <= 4
        assert boost_model.leaf_count(10) < boost_model.leaf_count(25)

    def test_first_round_starts_from_mean(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        model = fit_boost(train, BoostParams(max_depth=1, n_rounds=1, learning_rate=1.0))
        # one full-rate stump reproduces the stump's leaf means
        stump = model.trees[0]
        expected = np.clip(model.initial + stump.predict(valid.features), 0.0, 1.0)
        assert np.allclose(model.predict(valid.features), expected)
        assert model.initial == pytest.approx(train.target.mean())

    def test_training_error_decreases(self, dgp1_splits):
        train, _, _ = dgp1_splits
        model = fit_boost(train, BoostParams(max_depth=2, n_rounds=30))
        staged = model.staged_raw(train.features)
        sse = ((staged - train.target) ** 2).sum(axis=1)
        assert np.all(np.diff(sse) <= 1e-9)

    def test_logistic_objective_scores_in_open_interval(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        model = fit_boost(train, BoostParams(max_depth=2, n_rounds=10, objective="logistic"))
        scores = model.predict(valid.features)
        assert np.all((scores > 0.0) & (scores < 1.0))
        assert np.allclose(scores, special.expit(model.staged_raw(valid.features)[-1]))


# ============================================================================
# LOGISTIC REGRESSION
# ============================================================================

@pytest.mark.unit
class TestLogistic:

    def test_recovers_dgp1_coefficients(self, dgp1_sample):
        model = fit_logistic(dgp1_sample.dataset)
        assert model.converged
        assert model.intercept == pytest.approx(0.0, abs=0.15)
        assert model.coefficients == pytest.approx([0.5, 1.0], abs=0.15)
        assert model.leaf_count == 0

    def test_gradient_at_optimum_is_zero_and_matches_finite_differences(self, dgp1_sample):
        ds = dgp1_sample.dataset
        model = fit_logistic(ds)
        design, _, _ = logistic_design(ds)
        beta = np.concatenate([[model.intercept], model.coefficients])
        assert gradient_check(design, ds.target, beta) < 1e-5
        assert gradient_check(design, ds.target, np.zeros_like(beta)) < 1e-5

    def test_categorical_reference_level_dropped(self, categorical_dataset):
        design, kept, names = logistic_design(categorical_dataset)
        assert kept == (0, 2, 3)
        assert names == ("(intercept)", "x", "c=b", "c=c")
        model = fit_logistic(categorical_dataset)
        assert model.coefficients.size == 3
        assert np.all((model.predict(categorical_dataset.features) > 0) & (model.predict(categorical_dataset.features) < 1))

    def test_collinear_column_is_named(self, rng):
        x = rng.standard_normal(50)
        features = np.column_stack([x, 2.0 * x])
        ds = Dataset(features=features, target=(rng.random(50) < 0.5).astype(float), feature_names=("a", "b"))
        with pytest.raises(CollinearityError) as excinfo:
            fit_logistic(ds)
        assert excinfo.value.column == "b"

    def test_check_full_rank_accepts_independent_columns(self, rng):
        check_full_rank(np.column_stack([np.ones(10), rng.standard_normal(10)]), ("1", "x"))

    def test_separation_is_flagged(self, tiny_dataset):
        model = fit_logistic(tiny_dataset)
        assert not model.converged

    def test_too_few_rows(self):
        ds = Dataset(features=np.array([[0.1], [0.9]]), target=[0, 1])
        with pytest.raises(ParameterError, match="needs n >"):
            fit_logistic(ds)


# ============================================================================
# SERIALIZATION
# ============================================================================

@pytest.mark.unit
class TestSerialization:

    def test_every_kind_predicts_identically_after_reload(self, dgp1_splits):
        train, valid, _ = dgp1_splits
        models = [
            fit_tree(train, TreeParams(min_bucket=25)),
            fit_forest(train, ForestParams(mtry=1, min_bucket=40, n_trees=3), workers=1),
            fit_boost(train, BoostParams(max_depth=2, n_rounds=5, objective="logistic")),
            fit_logistic(train),
        ]
        for model in models:
            restored = model_from_json(model_to_json(model))
            assert type(restored) is type(model)
            assert np.array_equal(restored.predict(valid.features), model.predict(valid.features))

    def test_unknown_version(self, tiny_dataset):
        text = model_to_json(fit_tree(tiny_dataset, TreeParams(min_bucket=3))).replace(
            '"format_version": 1', '"format_version": 99'
        )
        with pytest.raises(ParameterError, match="format_version"):
            model_from_json(text)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError, match="kind"):
            model_from_json('{"format_version": 1, "kind": "svm"}')
