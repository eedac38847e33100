#!/usr/bin/env python3
"""
scoreshape - Selection Harness

Grid-search model selection under the MSE*, AUC*, Brier*, ICI* and KL*
criteria, synthetic replication studies, and the real-data study in which
a logistic model's scores define a Beta prior used as the KL reference.

SELECTION PROTOCOL:
===================
1. Every grid point is fitted once on the training split. Boosting fits one
   model per depth and reads every round count from staged predictions.
2. All criteria are evaluated on the validation split; AUC is maximized,
   the others minimized. Ties go to the first point in enumeration order.
3. Chosen points are refitted (fits are deterministic) and scored on the
   test split. KL* minus AUC* differences form the delta columns.

Grid points and replications run on thread pools; results are gathered by
index, so output never depends on scheduling.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from distributions import fit_beta_mle, histogram
from errors import DomainError, ParameterError, ReplicationError, ScoreshapeError
from learners import (
    BoostModel,
    LearnerModel,
    fit_boost,
    fit_forest,
    fit_logistic,
    fit_tree,
)
from metrics import compute_metric_table
from models import (
    ALL_CRITERIA,
    DELTA_METRICS,
    METRIC_NAMES,
    BetaPrior,
    BoostParams,
    CandidateResult,
    CriterionKind,
    Dataset,
    DgpSpec,
    ForestParams,
    GridPoint,
    GridSpec,
    LearnerKind,
    MetricTable,
    ScoreHistogram,
    SelectedModel,
    SelectionReport,
    TreeParams,
)
from synthetic_dgp import generate, generate_resampled_dgp4
from tabular_data import split

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

SMALLEST_ROW = "smallest"
LARGEST_ROW = "largest"
GLM_ROW = "GLM"

GRID_FIELDS: Tuple[str, ...] = ('min_bucket', 'mtry', 'max_depth', 'n_rounds')
CANDIDATE_COLUMNS: Tuple[str, ...] = (
    'replication', 'seed', 'point', *GRID_FIELDS, 'leaf_count', *METRIC_NAMES,
)


# ============================================================================
# REFERENCE DISTRIBUTIONS
# ============================================================================

@dataclass(frozen=True)
class ReferenceDistribution:
    """
    Distribution the score histograms are compared against.

    TRUE_PROBABILITIES uses each split's own true-probability vector. A
    Beta prior is represented by its quantiles at (k - 0.5) / size, which
    serve both as the KL reference histogram and as the QR reference.
    """
    kind: str
    prior: Optional[BetaPrior] = None
    bin_count: int = config.DEFAULT_BIN_COUNT
    reference_size: int = config.REFERENCE_SAMPLE_SIZE

    TRUE_PROBABILITIES = "true_probabilities"
    BETA_PRIOR = "beta_prior"

    def __post_init__(self):
        if self.kind not in (self.TRUE_PROBABILITIES, self.BETA_PRIOR):
            raise ParameterError(f"Unknown reference kind '{self.kind}'")
        if self.kind == self.BETA_PRIOR and self.prior is None:
            raise ParameterError("A Beta-prior reference needs a fitted prior")

    @classmethod
    def true_probabilities(cls, bin_count: int = config.DEFAULT_BIN_COUNT) -> 'ReferenceDistribution':
        return cls(cls.TRUE_PROBABILITIES, bin_count=bin_count)

    @classmethod
    def beta_prior(cls, prior: BetaPrior, bin_count: int = config.DEFAULT_BIN_COUNT) -> 'ReferenceDistribution':
        return cls(cls.BETA_PRIOR, prior=prior, bin_count=bin_count)

    def values(self, ds: Dataset) -> np.ndarray:
        """Reference values matched to a split."""
        if self.kind == self.TRUE_PROBABILITIES:
            if ds.true_prob is None:
                raise DomainError("A true-probability reference needs a split with true probabilities")
            return ds.true_prob
        return self.prior.quantile_sample(self.reference_size)

    def histogram(self, ds: Dataset) -> ScoreHistogram:
        return histogram(self.values(ds), self.bin_count)


@dataclass(frozen=True, eq=False)
class _SplitContext:
    """A split with its reference histogram and values precomputed."""
    data: Dataset
    reference_histogram: ScoreHistogram
    reference_values: np.ndarray

    @classmethod
    def build(cls, ds: Dataset, reference: ReferenceDistribution) -> '_SplitContext':
        values = reference.values(ds)
        return cls(ds, histogram(values, reference.bin_count), values)

    def metrics(self, scores: np.ndarray, pseudo_count: float) -> MetricTable:
        return compute_metric_table(
            scores,
            self.data.target,
            self.reference_histogram,
            self.reference_values,
            true_prob=self.data.true_prob,
            pseudo_count=pseudo_count,
        )


# ============================================================================
# GRID CONFIGURATION
# ============================================================================

_GRID_KEYS = {
    LearnerKind.TREE: ('min_bucket',),
    LearnerKind.FOREST: ('mtry', 'min_bucket', 'n_trees'),
    LearnerKind.BOOST: ('max_depth', 'n_rounds', 'learning_rate'),
}


def build_grid(
    learner: Union[LearnerKind, str],
    n_features: int,
    overrides: Optional[Mapping[str, Any]] = None,
) -> GridSpec:
    """
    Default grid for learner with per-key overrides.

    Forest mtry values outside [1, n_features] are dropped.

    Raises:
        ParameterError: Unknown override key, or no usable mtry left
    """
    learner = LearnerKind(learner)
    base = GridSpec.default(learner, n_features).to_dict()
    for key, value in (overrides or {}).items():
        if key not in _GRID_KEYS[learner]:
            raise ParameterError(f"Grid key '{key}' does not apply to the {learner.value} learner")
        base[key] = value

    if learner is LearnerKind.FOREST:
        mtry = [m for m in base['mtry'] if 1 <= int(m) <= n_features]
        if not mtry:
            raise ParameterError(f"No mtry value in {base['mtry']} fits {n_features} features")
        base['mtry'] = mtry
    base['learner'] = learner
    return GridSpec(**base)


def load_grid_file(path: Union[str, Path], learner: Union[LearnerKind, str], n_features: int) -> GridSpec:
    """Grid for learner from the [tree] / [forest] / [boost] table of a TOML file."""
    learner = LearnerKind(learner)
    data = config.read_toml(path)
    return build_grid(learner, n_features, data.get(learner.value, {}))


# ============================================================================
# STUDY CONFIGURATION
# ============================================================================

@dataclass(frozen=True)
class StudyConfig:
    """
    Declarative description of a selection study.

    Synthetic studies set dgp / noise / n (observations per split);
    real-data studies set csv and schema instead.
    """
    learner: LearnerKind = LearnerKind.TREE
    dgp: int = 1
    noise: int = 0
    n: int = config.DEFAULT_N_PER_SPLIT
    reps: int = config.DEFAULT_REPLICATIONS
    seed: int = config.DEFAULT_SEED
    criteria: Tuple[CriterionKind, ...] = ALL_CRITERIA
    grid: Dict[str, Any] = field(default_factory=dict)
    n_trees: int = config.DEFAULT_N_TREES
    include_extremes: bool = True
    include_glm: bool = False
    dgp4_resample: bool = False
    epsilon: float = 0.05
    bin_count: int = config.DEFAULT_BIN_COUNT
    pseudo_count: float = config.KL_PSEUDO_COUNT
    csv: Optional[str] = None
    schema: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'learner', LearnerKind(self.learner))
        object.__setattr__(self, 'criteria', tuple(CriterionKind.parse(c) for c in self.criteria))
        if self.reps < 1:
            raise ParameterError(f"reps must be at least 1 (got {self.reps})")
        if self.n < 1:
            raise ParameterError(f"n must be at least 1 (got {self.n})")
        if not self.criteria:
            raise ParameterError("At least one criterion is required")
        DgpSpec(self.dgp, self.noise, self.seed)

    def grid_overrides(self) -> Dict[str, Any]:
        overrides = dict(self.grid)
        if self.learner is LearnerKind.FOREST:
            overrides.setdefault('n_trees', self.n_trees)
        return overrides

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learner': self.learner.value,
            'dgp': self.dgp,
            'noise': self.noise,
            'n': self.n,
            'reps': self.reps,
            'seed': self.seed,
            'criteria': [c.value for c in self.criteria],
            'grid': dict(self.grid),
            'n_trees': self.n_trees,
            'include_extremes': self.include_extremes,
            'include_glm': self.include_glm,
            'dgp4_resample': self.dgp4_resample,
            'epsilon': self.epsilon,
            'bin_count': self.bin_count,
            'pseudo_count': self.pseudo_count,
            'csv': self.csv,
            'schema': self.schema,
        }


_STUDY_KEYS = set(StudyConfig.__dataclass_fields__)


def load_study_config(path: Union[str, Path], **overrides: Any) -> StudyConfig:
    """
    Read a study TOML file; keyword overrides (e.g. from CLI flags) win.

    A grid_file key merges that file's table for the study's learner into
    the [grid] overrides. Relative csv / schema / grid_file paths resolve
    against the study file's directory.
    """
    path = Path(path)
    data = config.read_toml(path)
    grid_file = data.pop('grid_file', None)
    unknown = set(data) - _STUDY_KEYS
    if unknown:
        raise ParameterError(f"Unknown study keys in {path}: {', '.join(sorted(unknown))}")

    for key in ('csv', 'schema'):
        if data.get(key):
            data[key] = str((path.parent / data[key]).resolve())
    data.update({k: v for k, v in overrides.items() if v is not None})

    study = StudyConfig(**data)
    if grid_file:
        table = config.read_toml(path.parent / grid_file).get(study.learner.value, {})
        merged = {**table, **study.grid}
        study = StudyConfig(**{**study.to_dict(), 'grid': merged})
    return study


# ============================================================================
# CANDIDATE EVALUATION
# ============================================================================

def fit_grid_point(
    point: GridPoint, train: Dataset, grid: GridSpec, seed: int, workers: Optional[int] = None
) -> LearnerModel:
    """Fit the model of one grid point; a boosting point fits point.n_rounds rounds."""
    if point.learner is LearnerKind.TREE:
        return fit_tree(train, TreeParams(min_bucket=point.min_bucket))
    if point.learner is LearnerKind.FOREST:
        params = ForestParams(mtry=point.mtry, min_bucket=point.min_bucket, n_trees=grid.n_trees, seed=seed)
        return fit_forest(train, params, workers=workers)
    params = BoostParams(
        max_depth=point.max_depth,
        n_rounds=point.n_rounds or grid.n_rounds,
        learning_rate=grid.learning_rate,
        seed=seed,
    )
    return fit_boost(train, params)


def _model_scores(model: LearnerModel, point: GridPoint, X: np.ndarray) -> np.ndarray:
    if isinstance(model, BoostModel):
        return model.predict(X, at_round=point.n_rounds)
    return np.clip(model.predict(X), 0.0, 1.0)


def _model_leaves(model: LearnerModel, point: GridPoint) -> float:
    if isinstance(model, BoostModel):
        return float(model.leaf_count(point.n_rounds))
    return float(model.leaf_count)


@dataclass
class GridEvaluation:
    """Validation results of every grid point plus the fits worth keeping."""
    grid: GridSpec
    candidates: List[CandidateResult]
    seed: int
    boost_models: Dict[int, BoostModel] = field(default_factory=dict)

    def model_for(self, point: GridPoint, train: Dataset, workers: int = 1) -> LearnerModel:
        """Fitted model of a point; boosting reuses the staged fit."""
        if point.learner is LearnerKind.BOOST:
            return self.boost_models[point.max_depth]
        return fit_grid_point(point, train, self.grid, self.seed, workers)


def evaluate_grid(
    train: Dataset,
    validation: _SplitContext,
    grid: GridSpec,
    seed: int = config.DEFAULT_SEED,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
    workers: Optional[int] = None,
) -> GridEvaluation:
    """Fit every grid point on train and score it on the validation split."""
    workers = workers or config.worker_count()
    points = grid.points()
    X_valid = validation.data.features

    if grid.learner is LearnerKind.BOOST:
        def fit_depth(depth: int) -> BoostModel:
            return fit_grid_point(
                GridPoint(0, LearnerKind.BOOST, max_depth=depth, n_rounds=grid.n_rounds), train, grid, seed, 1
            )

        with ThreadPoolExecutor(max_workers=workers) as executor:
            fitted = dict(zip(grid.max_depth, executor.map(fit_depth, grid.max_depth)))

        staged = {depth: model.staged_predict(X_valid) for depth, model in fitted.items()}

        def score_point(point: GridPoint) -> CandidateResult:
            metrics = validation.metrics(staged[point.max_depth][point.n_rounds - 1], pseudo_count)
            return CandidateResult(point, metrics, float(fitted[point.max_depth].leaf_count(point.n_rounds)))

        with ThreadPoolExecutor(max_workers=workers) as executor:
            candidates = list(executor.map(score_point, points))
        return GridEvaluation(grid, candidates, seed, boost_models=fitted)

    # forests parallelize over grid points, so each forest fits its trees serially
    def evaluate_point(point: GridPoint) -> CandidateResult:
        model = fit_grid_point(point, train, grid, seed, workers=1)
        metrics = validation.metrics(_model_scores(model, point, X_valid), pseudo_count)
        logger.debug(f"Grid point {point.label()}: val AUC={metrics.auc:.4f} KL={metrics.kl:.4f}")
        return CandidateResult(point, metrics, _model_leaves(model, point))

    with ThreadPoolExecutor(max_workers=workers) as executor:
        candidates = list(executor.map(evaluate_point, points))
    return GridEvaluation(grid, candidates, seed)


def select_index(candidates: Sequence[CandidateResult], criterion: CriterionKind) -> Optional[int]:
    """
    Index of the winning candidate, first one on ties.

    Returns None when the criterion's metric is unavailable.
    """
    values = [c.validation.get(criterion.value) for c in candidates]
    if not values or any(v is None for v in values):
        return None
    array = np.asarray(values, dtype=np.float64)
    return int(np.argmax(array) if criterion.maximize else np.argmin(array))


def extreme_indices(candidates: Sequence[CandidateResult]) -> Dict[str, int]:
    """Candidates with the fewest and the most leaves (first on ties)."""
    leaves = np.asarray([c.leaf_count for c in candidates])
    return {SMALLEST_ROW: int(np.argmin(leaves)), LARGEST_ROW: int(np.argmax(leaves))}


def run_grid(
    train: Dataset,
    validation: Dataset,
    grid: GridSpec,
    reference: ReferenceDistribution,
    criteria: Sequence[CriterionKind] = ALL_CRITERIA,
    seed: int = config.DEFAULT_SEED,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
    workers: Optional[int] = None,
) -> Dict[CriterionKind, Tuple[CandidateResult, LearnerModel]]:
    """
    Choose one fitted model per criterion.

    MSE* is skipped with a warning when the validation split carries no
    true probabilities.
    """
    context = _SplitContext.build(validation, reference)
    evaluation = evaluate_grid(train, context, grid, seed, pseudo_count, workers)
    chosen: Dict[CriterionKind, Tuple[CandidateResult, LearnerModel]] = {}
    for criterion in criteria:
        index = select_index(evaluation.candidates, criterion)
        if index is None:
            logger.warning(f"{criterion.label} skipped: validation split has no true probabilities")
            continue
        candidate = evaluation.candidates[index]
        chosen[criterion] = (candidate, evaluation.model_for(candidate.point, train))
    return chosen


# ============================================================================
# SELECTION REPORTS
# ============================================================================

def select_and_report(
    train: Dataset,
    validation: Dataset,
    test: Dataset,
    grid: GridSpec,
    reference: ReferenceDistribution,
    criteria: Sequence[CriterionKind] = ALL_CRITERIA,
    seed: int = config.DEFAULT_SEED,
    include_extremes: bool = True,
    reference_model: Optional[Tuple[str, LearnerModel]] = None,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
    prior: Optional[BetaPrior] = None,
    workers: Optional[int] = None,
) -> SelectionReport:
    """
    Grid search followed by test-split scoring of every selected model.

    Rows come in criterion order, then 'smallest' / 'largest' (when
    include_extremes), then the reference model row (when given).
    """
    valid_ctx = _SplitContext.build(validation, reference)
    test_ctx = _SplitContext.build(test, reference)
    evaluation = evaluate_grid(train, valid_ctx, grid, seed, pseudo_count, workers)
    candidates = evaluation.candidates

    picks: List[Tuple[str, int, Optional[float]]] = []
    for criterion in criteria:
        index = select_index(candidates, criterion)
        if index is None:
            logger.warning(f"{criterion.label} skipped: validation split has no true probabilities")
            continue
        picks.append((criterion.label, index, candidates[index].validation.get(criterion.value)))
    if include_extremes:
        picks += [(name, index, None) for name, index in extreme_indices(candidates).items()]

    test_scores: Dict[int, np.ndarray] = {}
    rows: List[SelectedModel] = []
    histograms: Dict[str, ScoreHistogram] = {'reference': test_ctx.reference_histogram}
    for name, index, value in picks:
        candidate = candidates[index]
        if index not in test_scores:
            model = evaluation.model_for(candidate.point, train, workers or config.worker_count())
            test_scores[index] = _model_scores(model, candidate.point, test.features)
        scores = test_scores[index]
        rows.append(SelectedModel(
            name=name,
            point=candidate.point,
            leaf_count=candidate.leaf_count,
            validation=candidate.validation,
            test=test_ctx.metrics(scores, pseudo_count),
            validation_value=value,
        ))
        histograms[name] = histogram(scores, reference.bin_count)

    if reference_model is not None:
        name, model = reference_model
        valid_scores = np.clip(model.predict(validation.features), 0.0, 1.0)
        scores = np.clip(model.predict(test.features), 0.0, 1.0)
        rows.append(SelectedModel(
            name=name,
            point=None,
            leaf_count=0.0,
            validation=valid_ctx.metrics(valid_scores, pseudo_count),
            test=test_ctx.metrics(scores, pseudo_count),
        ))
        histograms[name] = histogram(scores, reference.bin_count)

    report = SelectionReport(
        learner=grid.learner,
        rows=tuple(rows),
        reference=reference.kind,
        prior=prior,
        histograms=histograms,
        candidates=tuple(candidates),
    )
    if report.deltas:
        logger.info(
            f"{grid.learner.value}: KL* vs AUC* test deltas "
            + ", ".join(f"{k}={v:+.4f}" for k, v in report.deltas.items())
        )
    return report


# ============================================================================
# REPLICATION STUDIES
# ============================================================================

def replication_seed(master_seed: int, index: int) -> int:
    """Seed of replication index, derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


@dataclass(frozen=True)
class StudyResult:
    """Per-replication selection reports of one study."""
    config: StudyConfig
    reports: Tuple[SelectionReport, ...]
    seeds: Tuple[int, ...]

    def replication_frame(self) -> pd.DataFrame:
        """One row per (replication, model row) with test metrics."""
        records = []
        for index, (seed, report) in enumerate(zip(self.seeds, self.reports)):
            for row in report.rows:
                record = {
                    'replication': index,
                    'seed': seed,
                    'model': row.name,
                    'params': '' if row.point is None else row.point.label(),
                    'leaf_count': row.leaf_count,
                }
                record.update({name: row.test.get(name) for name in METRIC_NAMES})
                records.append(record)
        return pd.DataFrame.from_records(records)

    def summary_frame(self) -> pd.DataFrame:
        """Mean and standard deviation (ddof=1) per model row over replications."""
        return summarize_replications(self.replication_frame())

    def delta_frame(self) -> pd.DataFrame:
        """Test-split KL* minus AUC* differences per replication."""
        records = [
            {'replication': index, **report.deltas}
            for index, report in enumerate(self.reports)
            if report.deltas
        ]
        return pd.DataFrame.from_records(records, columns=['replication', *DELTA_METRICS])

    def candidate_frame(self) -> pd.DataFrame:
        """
        One row per (replication, grid point) with validation metrics.

        Plotting kl, ici or brier against leaf_count traces the grid path
        each criterion walks along.
        """
        records = []
        for index, (seed, report) in enumerate(zip(self.seeds, self.reports)):
            for candidate in report.candidates:
                record = {
                    'replication': index,
                    'seed': seed,
                    'point': candidate.point.index,
                    **{name: getattr(candidate.point, name) for name in GRID_FIELDS},
                    'leaf_count': candidate.leaf_count,
                }
                record.update({name: candidate.validation.get(name) for name in METRIC_NAMES})
                records.append(record)
        return pd.DataFrame.from_records(records, columns=list(CANDIDATE_COLUMNS))


def summarize_replications(frame: pd.DataFrame) -> pd.DataFrame:
    """Aggregate a replication frame into mean / std columns, rows in first-seen model order."""
    columns = ['leaf_count', *METRIC_NAMES]
    numeric = frame[['model', *columns]].copy()
    numeric[columns] = numeric[columns].apply(pd.to_numeric, errors='coerce')
    grouped = numeric.groupby('model', sort=False)
    means = grouped[columns].mean().add_suffix('_mean')
    stds = grouped[columns].std(ddof=1).add_suffix('_std')
    ordered = [c for pair in zip(means.columns, stds.columns) for c in pair]
    summary = pd.concat([means, stds], axis=1)[ordered]
    summary.insert(0, 'replications', grouped.size())
    return summary.reset_index()


def _study_sample(study: StudyConfig, seed: int) -> Dataset:
    spec = DgpSpec(study.dgp, study.noise, seed)
    total = 3 * study.n
    if study.dgp == 4 and study.dgp4_resample:
        return generate_resampled_dgp4(spec, total, epsilon=study.epsilon).dataset
    return generate(spec, total).dataset


def run_replication(study: StudyConfig, index: int, workers: Optional[int] = None) -> SelectionReport:
    """
    One replication: generate, split in thirds, select, score.

    Raises:
        ReplicationError: Wrapping any failure with the index and seed
    """
    seed = replication_seed(study.seed, index)
    try:
        data = _study_sample(study, seed)
        parts = split(data, config.SIMULATION_RATIOS, seed)
        train, validation, test = (data.subset(parts.train), data.subset(parts.validation), data.subset(parts.test))
        grid = build_grid(study.learner, data.n_features, study.grid_overrides())
        reference_model = (GLM_ROW, fit_logistic(train)) if study.include_glm else None

        report = select_and_report(
            train,
            validation,
            test,
            grid,
            ReferenceDistribution.true_probabilities(study.bin_count),
            criteria=study.criteria,
            seed=seed,
            include_extremes=study.include_extremes,
            reference_model=reference_model,
            pseudo_count=study.pseudo_count,
            workers=workers,
        )
    except (ScoreshapeError, ValueError, ArithmeticError, IndexError) as e:
        raise ReplicationError(str(e), index=index, seed=seed) from e
    logger.info(f"Replication {index + 1}/{study.reps} finished (seed {seed})")
    return report


def replicate(study: StudyConfig, workers: Optional[int] = None) -> StudyResult:
    """
    Run study.reps replications and collect their reports.

    Replications run concurrently; each uses the seed
    replication_seed(study.seed, index), so results are identical for any
    worker count.
    """
    workers = workers or config.worker_count()
    outer = max(1, min(workers, study.reps))
    inner = max(1, workers // outer)
    logger.info(
        f"Study: {study.learner.value} on DGP{study.dgp} (noise {study.noise}), "
        f"n={study.n} per split, {study.reps} replications, seed {study.seed}"
    )
    with ThreadPoolExecutor(max_workers=outer) as executor:
        reports = tuple(executor.map(lambda i: run_replication(study, i, inner), range(study.reps)))
    seeds = tuple(replication_seed(study.seed, i) for i in range(study.reps))
    return StudyResult(config=study, reports=reports, seeds=seeds)


# ============================================================================
# REAL-DATA STUDY
# ============================================================================

def real_data_study(
    dataset: Dataset,
    learner: Union[LearnerKind, str] = LearnerKind.TREE,
    grid: Optional[GridSpec] = None,
    prior_model: str = "glm",
    ratios: Sequence[float] = config.REAL_DATA_RATIOS,
    seed: int = config.DEFAULT_SEED,
    criteria: Sequence[CriterionKind] = (CriterionKind.AUC_STAR, CriterionKind.BRIER_STAR,
                                         CriterionKind.ICI_STAR, CriterionKind.KL_STAR),
    include_extremes: bool = False,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
    workers: Optional[int] = None,
) -> SelectionReport:
    """
    Select models on data without true probabilities.

    The logistic model is fitted on the training split; a Beta prior fitted
    by maximum likelihood to its training scores becomes the KL reference.
    The logistic model's own metrics are reported as the 'GLM' row.

    Raises:
        ParameterError: Unsupported prior model
        DomainError: The prior scores are degenerate (Beta MLE unbounded)
    """
    if prior_model.lower() != "glm":
        raise ParameterError(f"Unsupported prior model '{prior_model}' (expected 'glm')")
    if dataset.has_true_prob:
        logger.info("Ignoring the true_probability column on the real-data path")
        dataset = dataset.without_true_prob()

    parts = split(dataset, ratios, seed)
    train, validation, test = (dataset.subset(parts.train), dataset.subset(parts.validation),
                               dataset.subset(parts.test))
    glm = fit_logistic(train)
    try:
        prior = fit_beta_mle(glm.predict(train.features))
    except DomainError as e:
        raise DomainError(f"Cannot fit a Beta prior to the logistic training scores: {e}") from e
    logger.info(f"Prior from logistic training scores: {prior} (log-likelihood {prior.log_likelihood:.2f})")

    learner = LearnerKind(learner)
    grid = grid or build_grid(learner, dataset.n_features)
    return select_and_report(
        train,
        validation,
        test,
        grid,
        ReferenceDistribution.beta_prior(prior),
        criteria=[CriterionKind.parse(c) for c in criteria],
        seed=seed,
        include_extremes=include_extremes,
        reference_model=(GLM_ROW, glm),
        pseudo_count=pseudo_count,
        prior=prior,
        workers=workers,
    )
