#!/usr/bin/env python3
"""
scoreshape - Learners Module

Regression learners on 0/1 targets that produce scores in [0, 1]:

- CART regression tree (SSE splitting, midpoint thresholds, min_bucket /
  min_split / max_depth / complexity penalty controls)
- Random forest (bootstrap rows, mtry features drawn per split, one RNG
  stream per tree, trees fitted on a thread pool)
- Stagewise boosting of depth-limited trees with cached staged predictions
- Logistic regression by iteratively reweighted least squares

Every fitted model is immutable and serializes to a versioned JSON document
(model_to_json / model_from_json).

DETERMINISM:
============
Split ties go to the lowest feature index, then the lowest threshold. Tree
t of a forest draws from np.random.default_rng([seed, t]), so predictions do
not depend on the number of worker threads.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, special

import config
from errors import (
    CollinearityError,
    DimensionError,
    DomainError,
    NumericError,
    ParameterError,
    RangeError,
)
from models import BoostObjective, BoostParams, Dataset, ForestParams, TreeParams

__version__ = "1.0.0"

logger = logging.getLogger(__name__)


def _check_width(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n_features:
        raise DimensionError(f"Expected {n_features} feature columns, got {X.shape[1]}")
    return X


# ============================================================================
# REGRESSION TREE
# ============================================================================

@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    Fitted CART tree stored as parallel node arrays.

    Internal node i routes a row left when row[feature[i]] < threshold[i].
    Leaves have feature -1 and predict value[i], the mean training target of
    the count[i] rows that reached them.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    n_features: int
    params: TreeParams

    def __post_init__(self):
        for name, dtype in (('feature', np.int64), ('threshold', np.float64), ('left', np.int64),
                            ('right', np.int64), ('value', np.float64), ('count', np.int64)):
            array = np.array(getattr(self, name), dtype=dtype, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.is_leaf))

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = _check_width(X, self.n_features)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[nodes] >= 0)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] < self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] >= 0]
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'tree',
            'format_version': config.MODEL_FORMAT_VERSION,
            'n_features': self.n_features,
            'params': self.params.to_dict(),
            'feature': self.feature.tolist(),
            'threshold': [None if np.isnan(t) else float(t) for t in self.threshold],
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'value': self.value.tolist(),
            'count': self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RegressionTree':
        return cls(
            feature=data['feature'],
            threshold=[np.nan if t is None else t for t in data['threshold']],
            left=data['left'],
            right=data['right'],
            value=data['value'],
            count=data['count'],
            n_features=int(data['n_features']),
            params=TreeParams.from_dict(data['params']),
        )


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    features: np.ndarray,
    params: TreeParams,
    min_gain: float,
) -> Optional[Tuple[int, float]]:
    """Best (feature, threshold) for a node, or None when no split qualifies."""
    m = rows.size
    Xn = X[np.ix_(rows, features)]
    yn = y[rows]
    order = np.argsort(Xn, axis=0, kind='stable')
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]

    left_sum = np.cumsum(ys, axis=0)[:-1]
    total = yn.sum()
    k = np.arange(1, m, dtype=np.float64)[:, np.newaxis]
    gain = left_sum ** 2 / k + (total - left_sum) ** 2 / (m - k) - total ** 2 / m

    valid = (xs[1:] > xs[:-1]) & (k >= params.min_bucket) & (m - k >= params.min_bucket)
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf).T

    # feature-major flattening: argmax takes the lowest feature, then lowest threshold
    best = int(np.argmax(gain))
    fi, ki = divmod(best, m - 1)
    node_sse = float(np.sum((yn - yn.mean()) ** 2))
    if gain[fi, ki] <= min_gain + 1e-12 * node_sse:
        return None

    lower, upper = xs[ki, fi], xs[ki + 1, fi]
    threshold = (lower + upper) / 2.0
    if not (lower < threshold <= upper):
        threshold = upper
    return int(features[fi]), float(threshold)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams,
    rng: Optional[np.random.Generator] = None,
    mtry: Optional[int] = None,
) -> RegressionTree:
    """Depth-first greedy partitioning on the rows of X."""
    n, p = X.shape
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    count: List[int] = []

    def add_node(rows: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        count.append(int(rows.size))
        return len(feature) - 1

    root_rows = np.arange(n)
    min_gain = params.complexity_penalty * float(np.sum((y - y.mean()) ** 2))
    all_features = np.arange(p)
    stack = [(add_node(root_rows), root_rows, 0)]

    while stack:
        node, rows, depth = stack.pop()
        if rows.size < params.min_split or rows.size < 2 * params.min_bucket or p == 0:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue

        if mtry is not None and mtry < p:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            candidates = all_features

        split = _best_split(X, y, rows, candidates, params, min_gain)
        if split is None:
            continue

        j, t = split
        go_left = X[rows, j] < t
        left_rows, right_rows = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = j, t
        left[node] = add_node(left_rows)
        right[node] = add_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return RegressionTree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        count=count,
        n_features=p,
        params=params,
    )


def _training_arrays(train: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    if train.n == 0:
        raise DomainError("Cannot fit a model on an empty dataset")
    return train.features, train.target


def fit_tree(train: Dataset, params: TreeParams) -> RegressionTree:
    """
    Fit a CART regression tree on the 0/1 target.

    A node is split when it holds at least min_split rows, both children
    keep at least min_bucket rows and the SSE reduction exceeds
    complexity_penalty times the root SSE. Thresholds are midpoints between
    consecutive distinct values. Fewer than min_split rows give a single
    leaf predicting the mean.
    """
    X, y = _training_arrays(train)
    tree = _grow_tree(X, y, params)
    logger.debug(f"Tree min_bucket={params.min_bucket}: {tree.leaf_count} leaves on n={train.n}")
    return tree


def predict_tree(tree: RegressionTree, rows: np.ndarray) -> Union[float, np.ndarray]:
    """Score of one row (1-d input) or of every row of a matrix."""
    single = np.ndim(rows) == 1
    scores = tree.predict(rows)
    return float(scores[0]) if single else scores


# ============================================================================
# RANDOM FOREST
# ============================================================================

@dataclass(frozen=True, eq=False)
class Forest:
    """Unweighted average of bootstrap trees."""
    trees: Tuple[RegressionTree, ...]
    params: ForestParams
    n_features: int

    @property
    def leaf_count(self) -> float:
        """Mean leaves per tree."""
        return float(np.mean([tree.leaf_count for tree in self.trees]))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _check_width(X, self.n_features)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'forest',
            'format_version': config.MODEL_FORMAT_VERSION,
            'n_features': self.n_features,
            'params': self.params.to_dict(),
            'trees': [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Forest':
        return cls(
            trees=tuple(RegressionTree.from_dict(t) for t in data['trees']),
            params=ForestParams.from_dict(data['params']),
            n_features=int(data['n_features']),
        )


def _forest_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, index: int) -> RegressionTree:
    rng = np.random.default_rng([params.seed, index])
    if params.bootstrap:
        rows = rng.integers(0, X.shape[0], size=X.shape[0])
        X, y = X[rows], y[rows]
    return _grow_tree(X, y, params.tree_params(), rng=rng, mtry=params.mtry)


def fit_forest(train: Dataset, params: ForestParams, workers: Optional[int] = None) -> Forest:
    """
    Fit a random forest.

    Tree t bootstraps n rows and draws mtry candidate features at every
    split from its own stream default_rng([seed, t]).

    Raises:
        ParameterError: If mtry exceeds the feature count
    """
    X, y = _training_arrays(train)
    if params.mtry > train.n_features:
        raise ParameterError(f"mtry={params.mtry} exceeds the {train.n_features} available features")

    workers = workers or config.worker_count()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        trees = tuple(executor.map(lambda t: _forest_tree(X, y, params, t), range(params.n_trees)))

    forest = Forest(trees=trees, params=params, n_features=train.n_features)
    logger.debug(
        f"Forest mtry={params.mtry} min_bucket={params.min_bucket}: "
        f"{params.n_trees} trees, {forest.leaf_count:.1f} leaves per tree"
    )
    return forest


def predict_forest(forest: Forest, X: np.ndarray) -> np.ndarray:
    return forest.predict(X)


# ============================================================================
# STAGEWISE BOOSTING
# ============================================================================

@dataclass(frozen=True, eq=False)
class BoostModel:
    """
    Boosted ensemble F_t = F_{t-1} + learning_rate * h_t.

    With the squared objective scores are F_t clipped to [0, 1]; with the
    logistic objective F_t is a logit and scores are sigmoid(F_t).
    """
    initial: float
    trees: Tuple[RegressionTree, ...]
    params: BoostParams
    n_features: int

    @property
    def n_rounds(self) -> int:
        return len(self.trees)

    def leaf_count(self, at_round: Optional[int] = None) -> int:
        """Total leaves over the first at_round trees."""
        at_round = self._check_round(at_round)
        return int(sum(tree.leaf_count for tree in self.trees[:at_round]))

    def _check_round(self, at_round: Optional[int]) -> int:
        if at_round is None:
            return self.n_rounds
        if not (1 <= at_round <= self.n_rounds):
            raise RangeError(f"at_round must lie in 1..{self.n_rounds} (got {at_round})")
        return int(at_round)

    def _transform(self, raw: np.ndarray) -> np.ndarray:
        if self.params.objective is BoostObjective.LOGISTIC:
            return special.expit(raw)
        return np.clip(raw, 0.0, 1.0)

    def staged_raw(self, X: np.ndarray) -> np.ndarray:
        """Untransformed F_1..F_T, one row per round."""
        X = _check_width(X, self.n_features)
        staged = np.empty((self.n_rounds, X.shape[0]))
        current = np.full(X.shape[0], self.initial)
        for t, tree in enumerate(self.trees):
            current = current + self.params.learning_rate * tree.predict(X)
            staged[t] = current
        return staged

    def staged_predict(self, X: np.ndarray) -> np.ndarray:
        """Scores after every round, one row per round."""
        return self._transform(self.staged_raw(X))

    def predict(self, X: np.ndarray, at_round: Optional[int] = None) -> np.ndarray:
        at_round = self._check_round(at_round)
        X = _check_width(X, self.n_features)
        raw = np.full(X.shape[0], self.initial)
        for tree in self.trees[:at_round]:
            raw = raw + self.params.learning_rate * tree.predict(X)
        return self._transform(raw)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'boost',
            'format_version': config.MODEL_FORMAT_VERSION,
            'n_features': self.n_features,
            'params': self.params.to_dict(),
            'initial': self.initial,
            'trees': [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BoostModel':
        return cls(
            initial=float(data['initial']),
            trees=tuple(RegressionTree.from_dict(t) for t in data['trees']),
            params=BoostParams.from_dict(data['params']),
            n_features=int(data['n_features']),
        )


def fit_boost(train: Dataset, params: BoostParams) -> BoostModel:
    """
    Stagewise boosting of depth-limited SSE trees.

    F_0 is the target mean (its logit for the logistic objective). Round t
    fits a tree with max_depth, min_bucket=1 and min_split=2 to the
    residuals y - F_{t-1} (y - sigmoid(F_{t-1}) for the logistic objective).
    """
    X, y = _training_arrays(train)
    tree_params = TreeParams(min_bucket=1, min_split=2, max_depth=params.max_depth)
    logistic = params.objective is BoostObjective.LOGISTIC

    mean = float(y.mean())
    if logistic:
        clipped = min(max(mean, config.BETA_CLIP), 1.0 - config.BETA_CLIP)
        initial = float(special.logit(clipped))
    else:
        initial = mean

    raw = np.full(train.n, initial)
    trees: List[RegressionTree] = []
    for t in range(params.n_rounds):
        fitted = special.expit(raw) if logistic else raw
        tree = _grow_tree(X, y - fitted, tree_params)
        trees.append(tree)
        raw = raw + params.learning_rate * tree.predict(X)
        if (t + 1) % 100 == 0:
            logger.debug(f"Boost depth={params.max_depth}: round {t + 1}/{params.n_rounds}")

    return BoostModel(initial=initial, trees=tuple(trees), params=params, n_features=train.n_features)


def predict_boost(model: BoostModel, X: np.ndarray, at_round: Optional[int] = None) -> np.ndarray:
    """
    Scores after at_round rounds (all rounds when None).

    Raises:
        RangeError: If at_round is outside 1..n_rounds
    """
    return model.predict(X, at_round)


# ============================================================================
# LOGISTIC REGRESSION
# ============================================================================

@dataclass(frozen=True, eq=False)
class LogisticModel:
    """
    Logistic regression s(x) = sigmoid(intercept + x[kept] . coefficients).

    One indicator per categorical group is dropped before fitting; kept
    lists the feature columns the coefficients refer to.
    """
    intercept: float
    coefficients: np.ndarray
    converged: bool
    iterations: int
    kept_columns: Tuple[int, ...] = ()
    n_features: int = 0
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=np.float64, copy=True).ravel()
        coefficients.setflags(write=False)
        object.__setattr__(self, 'coefficients', coefficients)
        object.__setattr__(self, 'kept_columns', tuple(int(c) for c in self.kept_columns))
        if len(self.kept_columns) != coefficients.size:
            raise DimensionError("One coefficient per kept column is required")
        if self.converged and not (np.isfinite(self.intercept) and np.all(np.isfinite(coefficients))):
            raise NumericError("A converged logistic model must have finite coefficients")

    @property
    def leaf_count(self) -> int:
        return 0

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        X = _check_width(X, self.n_features)
        return self.intercept + X[:, list(self.kept_columns)] @ self.coefficients

    def predict(self, X: np.ndarray) -> np.ndarray:
        return special.expit(self.linear_predictor(X))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'logistic',
            'format_version': config.MODEL_FORMAT_VERSION,
            'intercept': self.intercept,
            'coefficients': self.coefficients.tolist(),
            'converged': self.converged,
            'iterations': self.iterations,
            'kept_columns': list(self.kept_columns),
            'n_features': self.n_features,
            'feature_names': list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LogisticModel':
        return cls(
            intercept=float(data['intercept']),
            coefficients=data['coefficients'],
            converged=bool(data['converged']),
            iterations=int(data['iterations']),
            kept_columns=tuple(data['kept_columns']),
            n_features=int(data['n_features']),
            feature_names=tuple(data.get('feature_names', ())),
        )


def logistic_design(ds: Dataset) -> Tuple[np.ndarray, Tuple[int, ...], Tuple[str, ...]]:
    """
    Intercept column plus features, without the first level of each
    categorical group.

    Returns:
        (design matrix, kept feature columns, design column names)
    """
    dropped = {group.columns[0] for group in ds.categorical_groups if group.columns}
    kept = tuple(j for j in range(ds.n_features) if j not in dropped)
    design = np.hstack([np.ones((ds.n, 1)), ds.features[:, list(kept)]])
    names = ("(intercept)",) + tuple(ds.feature_names[j] for j in kept)
    return design, kept, names


def check_full_rank(design: np.ndarray, names: Sequence[str]) -> None:
    """
    Raise CollinearityError naming the first design column that is a linear
    combination of the columns before it.
    """
    if design.shape[1] == 0:
        return
    r = linalg.qr(design, mode='r')[0]
    diagonal = np.abs(np.diag(r[: design.shape[1], : design.shape[1]]))
    scale = max(float(diagonal.max()), 1.0)
    small = np.flatnonzero(diagonal <= config.COLLINEARITY_TOLERANCE * scale)
    if small.size:
        column = names[int(small[0])]
        raise CollinearityError(
            f"Design matrix is rank deficient: column '{column}' is collinear with earlier columns",
            column=column,
        )


def logistic_log_likelihood(beta: np.ndarray, design: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood sum_i y_i eta_i - log(1 + exp(eta_i))."""
    eta = design @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_gradient(beta: np.ndarray, design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Score vector X^T (y - sigmoid(X beta))."""
    return design.T @ (y - special.expit(design @ beta))


def gradient_check(design: np.ndarray, y: np.ndarray, beta: np.ndarray, step: float = 1e-5) -> float:
    """
    Largest relative gap between the analytic gradient and central finite
    differences of the log-likelihood (relative to max(|g_j|, 1)).
    """
    beta = np.asarray(beta, dtype=np.float64)
    analytic = logistic_gradient(beta, design, y)
    numeric = np.empty_like(analytic)
    for j in range(beta.size):
        shift = np.zeros_like(beta)
        shift[j] = step
        numeric[j] = (
            logistic_log_likelihood(beta + shift, design, y) - logistic_log_likelihood(beta - shift, design, y)
        ) / (2.0 * step)
    return float(np.max(np.abs(numeric - analytic) / np.maximum(np.abs(analytic), 1.0)))


def fit_logistic(
    train: Dataset,
    tolerance: float = config.IRLS_TOLERANCE,
    max_iterations: int = config.IRLS_MAX_ITERATIONS,
) -> LogisticModel:
    """
    Maximum-likelihood logistic regression by IRLS.

    Newton steps solve (X^T W X) delta = X^T (y - mu). Iteration stops when
    the largest score-equation entry is below tolerance, after
    max_iterations, or when a coefficient exceeds SEPARATION_BOUND in
    absolute value (separation; the model is returned with converged=False).

    Raises:
        ParameterError: If n does not exceed the number of design columns
        CollinearityError: If the design matrix is rank deficient
    """
    _, y = _training_arrays(train)
    design, kept, names = logistic_design(train)
    if train.n <= design.shape[1]:
        raise ParameterError(f"Logistic regression needs n > {design.shape[1]} (got n={train.n})")
    check_full_rank(design, names)

    beta = np.zeros(design.shape[1])
    iterations = 0
    separated = False
    mu = special.expit(design @ beta)
    score = design.T @ (y - mu)

    while np.max(np.abs(score)) >= tolerance and iterations < max_iterations:
        weights = np.maximum(mu * (1.0 - mu), 1e-12)
        information = design.T @ (design * weights[:, np.newaxis])
        try:
            beta = beta + linalg.solve(information, score, assume_a='pos')
        except linalg.LinAlgError as e:
            raise NumericError(f"IRLS information matrix is singular at iteration {iterations + 1}") from e
        iterations += 1
        if not np.all(np.isfinite(beta)):
            raise NumericError(f"IRLS produced non-finite coefficients at iteration {iterations}")

        mu = special.expit(design @ beta)
        score = design.T @ (y - mu)
        logger.debug(f"IRLS iteration {iterations}: max|score|={np.max(np.abs(score)):.3e}")
        if np.max(np.abs(beta)) > config.SEPARATION_BOUND:
            separated = True
            break

    converged = bool(not separated and np.max(np.abs(score)) < tolerance)
    if separated:
        logger.warning(
            f"Logistic coefficients exceed {config.SEPARATION_BOUND:g} after {iterations} iterations; "
            f"the classes look separable"
        )
    elif not converged:
        logger.warning(f"IRLS did not converge within {max_iterations} iterations")

    return LogisticModel(
        intercept=float(beta[0]),
        coefficients=beta[1:],
        converged=converged,
        iterations=iterations,
        kept_columns=kept,
        n_features=train.n_features,
        feature_names=names[1:],
    )


def predict_logistic(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


# ============================================================================
# SERIALIZATION
# ============================================================================

LearnerModel = Union[RegressionTree, Forest, BoostModel, LogisticModel]

_MODEL_KINDS = {
    'tree': RegressionTree,
    'forest': Forest,
    'boost': BoostModel,
    'logistic': LogisticModel,
}


def model_to_json(model: LearnerModel) -> str:
    return json.dumps(model.to_dict(), indent=2)


def model_from_json(text: str) -> LearnerModel:
    """
    Rebuild a model from model_to_json output.

    Raises:
        ParameterError: Unknown kind or unsupported format_version
    """
    data = json.loads(text)
    version = data.get('format_version')
    if version != config.MODEL_FORMAT_VERSION:
        raise ParameterError(f"Unsupported model format_version {version!r}")
    kind = data.get('kind')
    if kind not in _MODEL_KINDS:
        raise ParameterError(f"Unknown model kind {kind!r}")
    return _MODEL_KINDS[kind].from_dict(data)
