#!/usr/bin/env python3
"""
scoreshape - Data Models Module

This module defines the structured dataclasses passed between the ingestion,
distribution, metric, learner, generator and selection modules. Using
dataclasses instead of dictionaries provides:
- Validation of every invariant at construction time (__post_init__)
- Immutable values (frozen=True, read-only numpy buffers) that are safe to
  share across worker threads
- Serialization through to_dict/from_dict for the CSV and JSON outputs

Fitted learner models (trees, forests, boosting ensembles, logistic models)
carry prediction logic and live in learners.py.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

import config
from errors import DimensionError, DomainError, ParameterError, SchemaError

__version__ = "1.0.0"


def _frozen_array(values: Any, dtype: Any = np.float64) -> np.ndarray:
    """Copy values into a read-only numpy array."""
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


# ============================================================================
# TABULAR DATA MODELS
# ============================================================================

class ColumnKind(str, Enum):
    """Role of a CSV column."""
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TARGET = "target"
    TRUE_PROBABILITY = "true_probability"
    IGNORE = "ignore"


@dataclass(frozen=True)
class ColumnSpec:
    """
    Declared role of one CSV column.

    Attributes:
        name (str): Column name as it appears in the header row
        kind (ColumnKind): How the column is parsed and encoded

    Examples:
        >>> ColumnSpec("age", "numeric").kind
        <ColumnKind.NUMERIC: 'numeric'>
    """
    name: str
    kind: ColumnKind

    def __post_init__(self):
        if not isinstance(self.kind, ColumnKind):
            try:
                object.__setattr__(self, 'kind', ColumnKind(str(self.kind).strip().lower()))
            except ValueError:
                allowed = ", ".join(k.value for k in ColumnKind)
                raise SchemaError(
                    f"Column '{self.name}' has unknown kind '{self.kind}' (expected one of: {allowed})",
                    column=self.name,
                ) from None
        if not self.name:
            raise SchemaError("Column names must be non-empty")

    def to_dict(self) -> Dict[str, str]:
        return {'name': self.name, 'kind': self.kind.value}


def validate_schema(schema: Sequence[ColumnSpec]) -> None:
    """
    Check schema-level invariants.

    Raises:
        SchemaError: Duplicate names, no target or several targets, or more
            than one true_probability column
    """
    names = [spec.name for spec in schema]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise SchemaError(f"Duplicate column names in schema: {', '.join(duplicates)}", column=duplicates[0])

    targets = [spec.name for spec in schema if spec.kind is ColumnKind.TARGET]
    if len(targets) != 1:
        raise SchemaError(f"Schema must declare exactly one target column (found {len(targets)})")

    truths = [spec.name for spec in schema if spec.kind is ColumnKind.TRUE_PROBABILITY]
    if len(truths) > 1:
        raise SchemaError(
            f"Schema may declare at most one true_probability column (found {', '.join(truths)})",
            column=truths[1],
        )


@dataclass(frozen=True)
class CategoricalGroup:
    """One categorical variable and the indicator columns encoding it."""
    name: str
    levels: Tuple[str, ...]
    columns: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'levels', tuple(str(level) for level in self.levels))
        object.__setattr__(self, 'columns', tuple(int(c) for c in self.columns))
        if len(self.levels) != len(self.columns):
            raise SchemaError(
                f"Categorical '{self.name}' has {len(self.levels)} levels but {len(self.columns)} columns",
                column=self.name,
            )

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'levels': list(self.levels), 'columns': list(self.columns)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CategoricalGroup':
        return cls(name=data['name'], levels=tuple(data['levels']), columns=tuple(data['columns']))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Feature matrix, binary target and optional true probabilities.

    All arrays are copied into read-only float64 buffers, so a Dataset can be
    shared between worker threads.

    Attributes:
        features (np.ndarray): n x p matrix of encoded numeric features
        target (np.ndarray): length-n vector of 0.0 / 1.0
        true_prob (Optional[np.ndarray]): length-n vector in [0, 1]
        feature_names (Tuple[str, ...]): p column names (x1..xp when omitted)
        categorical_groups (Tuple[CategoricalGroup, ...]): indicator column
            groups produced by one-hot encoding

    Raises:
        DimensionError: If array shapes disagree
        DomainError: If a value violates its domain (non-binary target,
            probability outside [0, 1], NaN or infinite entries)
    """
    features: np.ndarray
    target: np.ndarray
    true_prob: Optional[np.ndarray] = None
    feature_names: Tuple[str, ...] = ()
    categorical_groups: Tuple[CategoricalGroup, ...] = ()

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim == 1:
            features = features.reshape(-1, 1) if features.size else features.reshape(len(features), 0)
        if features.ndim != 2:
            raise DimensionError(f"features must be a 2-d matrix (got {features.ndim} dimensions)")

        target = np.asarray(self.target, dtype=np.float64).ravel()
        n = features.shape[0]
        if target.shape[0] != n:
            raise DimensionError(f"target has {target.shape[0]} entries but features have {n} rows")
        if not np.all((target == 0.0) | (target == 1.0)):
            bad = target[(target != 0.0) & (target != 1.0)][0]
            raise DomainError(f"target values must be exactly 0 or 1 (found {bad})")
        if not np.all(np.isfinite(features)):
            raise DomainError("features contain NaN or infinite entries")

        if self.true_prob is not None:
            true_prob = np.asarray(self.true_prob, dtype=np.float64).ravel()
            if true_prob.shape[0] != n:
                raise DimensionError(f"true_prob has {true_prob.shape[0]} entries but features have {n} rows")
            if not np.all((true_prob >= 0.0) & (true_prob <= 1.0)):
                raise DomainError("true_prob entries must lie in [0, 1]")
            object.__setattr__(self, 'true_prob', _frozen_array(true_prob))

        names = tuple(str(name) for name in self.feature_names) or tuple(
            f"x{j + 1}" for j in range(features.shape[1])
        )
        if len(names) != features.shape[1]:
            raise DimensionError(
                f"{len(names)} feature names given for {features.shape[1]} feature columns"
            )

        groups = tuple(self.categorical_groups)
        for group in groups:
            if any(c < 0 or c >= features.shape[1] for c in group.columns):
                raise DimensionError(f"Categorical '{group.name}' refers to a missing column")

        object.__setattr__(self, 'features', _frozen_array(features))
        object.__setattr__(self, 'target', _frozen_array(target))
        object.__setattr__(self, 'feature_names', names)
        object.__setattr__(self, 'categorical_groups', groups)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def has_true_prob(self) -> bool:
        return self.true_prob is not None

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        """Rows at the given indices, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            target=self.target[idx],
            true_prob=None if self.true_prob is None else self.true_prob[idx],
            feature_names=self.feature_names,
            categorical_groups=self.categorical_groups,
        )

    def without_true_prob(self) -> 'Dataset':
        return Dataset(
            features=self.features,
            target=self.target,
            true_prob=None,
            feature_names=self.feature_names,
            categorical_groups=self.categorical_groups,
        )

    def __repr__(self) -> str:
        return (
            f"Dataset(n={self.n}, p={self.n_features}, "
            f"categorical={len(self.categorical_groups)}, true_prob={self.has_true_prob})"
        )


@dataclass(frozen=True, eq=False)
class SplitIndices:
    """
    Disjoint train / validation / test row indices.

    Attributes:
        train, validation, test (np.ndarray): int64 index arrays
        seed (int): Seed of the permutation that produced them
    """
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        parts = []
        for name in ('train', 'validation', 'test'):
            part = _frozen_array(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, part)
            parts.append(part)
        combined = np.concatenate(parts)
        if np.unique(combined).size != combined.size:
            raise ParameterError("train, validation and test indices must be disjoint")

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (int(self.train.size), int(self.validation.size), int(self.test.size))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'train': self.train.tolist(),
            'validation': self.validation.tolist(),
            'test': self.test.tolist(),
        }


# ============================================================================
# DISTRIBUTION MODELS
# ============================================================================

@dataclass(frozen=True, eq=False)
class ScoreHistogram:
    """
    Normalized equal-width histogram on [0, 1].

    Bin i covers [i/m, (i+1)/m); the last bin is closed at 1.

    Attributes:
        proportions (np.ndarray): m non-negative fractions summing to 1
        sample_size (int): Number of values that were binned

    Examples:
        >>> h = ScoreHistogram.from_counts([1, 2])
        >>> h.proportions.tolist(), h.bin_count
        ([0.3333333333333333, 0.6666666666666666], 2)
    """
    proportions: np.ndarray
    sample_size: int

    def __post_init__(self):
        proportions = np.asarray(self.proportions, dtype=np.float64).ravel()
        if proportions.size < 1:
            raise DimensionError("A histogram needs at least one bin")
        if np.any(proportions < 0) or not np.all(np.isfinite(proportions)):
            raise DomainError("Histogram proportions must be finite and non-negative")
        if abs(proportions.sum() - 1.0) > 1e-9:
            raise DomainError(f"Histogram proportions must sum to 1 (got {proportions.sum():.12f})")
        if int(self.sample_size) < 1:
            raise DomainError("Histogram sample_size must be positive")
        object.__setattr__(self, 'proportions', _frozen_array(proportions))
        object.__setattr__(self, 'sample_size', int(self.sample_size))

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> 'ScoreHistogram':
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise DomainError("Histogram counts must not all be zero")
        return cls(proportions=counts / total, sample_size=int(round(total)))

    @property
    def bin_count(self) -> int:
        return int(self.proportions.size)

    @property
    def counts(self) -> np.ndarray:
        """Raw bin counts recovered from the proportions."""
        return np.rint(self.proportions * self.sample_size)

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bin_count + 1)

    def to_rows(self) -> List[Dict[str, float]]:
        """One (bin_lower, bin_upper, proportion) record per bin."""
        edges = self.bin_edges
        return [
            {'bin_lower': float(edges[i]), 'bin_upper': float(edges[i + 1]), 'proportion': float(p)}
            for i, p in enumerate(self.proportions)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'bin_count': self.bin_count,
            'sample_size': self.sample_size,
            'proportions': self.proportions.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScoreHistogram':
        histogram = cls(proportions=data['proportions'], sample_size=data['sample_size'])
        if 'bin_count' in data and int(data['bin_count']) != histogram.bin_count:
            raise DimensionError("bin_count does not match the number of proportions")
        return histogram


@dataclass(frozen=True)
class BetaPrior:
    """
    Beta(alpha, beta) reference distribution fitted by maximum likelihood.

    Attributes:
        alpha (float): First shape parameter (> 0)
        beta (float): Second shape parameter (> 0)
        log_likelihood (float): Log-likelihood at (alpha, beta) on the fitted
            (clipped) scores
        iterations (int): Newton iterations used
        converged (bool): Whether the gradient tolerance was reached
    """
    alpha: float
    beta: float
    log_likelihood: float = float('nan')
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        for name in ('alpha', 'beta'):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"Beta shape parameter {name} must be positive and finite (got {value})")
            object.__setattr__(self, name, value)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def pdf(self, x: Any) -> np.ndarray:
        return stats.beta.pdf(x, self.alpha, self.beta)

    def cdf(self, x: Any) -> np.ndarray:
        return stats.beta.cdf(x, self.alpha, self.beta)

    def quantile_sample(self, size: int = config.REFERENCE_SAMPLE_SIZE) -> np.ndarray:
        """Quantiles at (k - 0.5) / size, k = 1..size."""
        levels = (np.arange(1, size + 1) - 0.5) / size
        return stats.beta.ppf(levels, self.alpha, self.beta)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'alpha': self.alpha,
            'beta': self.beta,
            'log_likelihood': self.log_likelihood,
            'iterations': self.iterations,
            'converged': self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BetaPrior':
        return cls(
            alpha=float(data['alpha']),
            beta=float(data['beta']),
            log_likelihood=float(data.get('log_likelihood', float('nan'))),
            iterations=int(data.get('iterations', 0)),
            converged=bool(data.get('converged', True)),
        )

    def __str__(self) -> str:
        return f"Beta({self.alpha:.4f}, {self.beta:.4f})"


# ============================================================================
# METRIC MODELS
# ============================================================================

@dataclass(frozen=True, eq=False)
class CalibrationCurve:
    """
    Reliability diagram with bins cut at empirical score quantiles.

    Attributes:
        bin_centers (np.ndarray): Midpoint of each bin's score range
        mean_observed (np.ndarray): Mean label per bin
        bin_edges (np.ndarray): B + 1 cut points
        counts (np.ndarray): Observations per bin
        requested_bins (int): B asked for by the caller
        merged (bool): True when tied quantiles reduced the bin count
    """
    bin_centers: np.ndarray
    mean_observed: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    requested_bins: int
    merged: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'bin_centers', _frozen_array(self.bin_centers))
        object.__setattr__(self, 'mean_observed', _frozen_array(self.mean_observed))
        object.__setattr__(self, 'bin_edges', _frozen_array(self.bin_edges))
        object.__setattr__(self, 'counts', _frozen_array(self.counts, dtype=np.int64))
        if not (self.bin_centers.size == self.mean_observed.size == self.counts.size):
            raise DimensionError("bin_centers, mean_observed and counts must have equal length")
        if self.bin_edges.size != self.bin_centers.size + 1:
            raise DimensionError("bin_edges must have one more entry than bin_centers")

    @property
    def bin_count(self) -> int:
        return int(self.bin_centers.size)

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.bin_centers - self.mean_observed)))


@dataclass(frozen=True)
class IciEstimate:
    """ICI value plus a flag set when all scores were equal."""
    value: float
    degenerate: bool = False


METRIC_NAMES: Tuple[str, ...] = ('mse', 'auc', 'brier', 'ici', 'kl', 'qr')


@dataclass(frozen=True)
class MetricTable:
    """
    One row of performance and calibration metrics.

    Attributes:
        auc (float): Area under the ROC curve
        brier (float): Brier score
        ici (float): Integrated calibration index
        kl (float): KL divergence of the score histogram from the reference
        qr (float): Interdecile range ratio against the reference
        mse_vs_truth (Optional[float]): Mean squared gap to the true
            probabilities, when they are known

    Raises:
        DomainError: If any metric is non-finite
    """
    auc: float
    brier: float
    ici: float
    kl: float
    qr: float
    mse_vs_truth: Optional[float] = None

    def __post_init__(self):
        for name in ('auc', 'brier', 'ici', 'kl', 'qr', 'mse_vs_truth'):
            value = getattr(self, name)
            if value is None:
                continue
            value = float(value)
            if not math.isfinite(value):
                raise DomainError(f"Metric {name} must be finite (got {value})")
            object.__setattr__(self, name, value)

    def get(self, name: str) -> Optional[float]:
        """Metric by short name ('mse', 'auc', 'brier', 'ici', 'kl', 'qr')."""
        if name == 'mse':
            return self.mse_vs_truth
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {name: self.get(name) for name in METRIC_NAMES}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'MetricTable':
        mse = data.get('mse', data.get('mse_vs_truth'))
        return cls(
            auc=data['auc'],
            brier=data['brier'],
            ici=data['ici'],
            kl=data['kl'],
            qr=data['qr'],
            mse_vs_truth=None if mse is None or (isinstance(mse, float) and math.isnan(mse)) else mse,
        )


# ============================================================================
# LEARNER PARAMETER MODELS
# ============================================================================

@dataclass(frozen=True)
class TreeParams:
    """
    CART settings.

    min_split defaults to MIN_SPLIT_FACTOR * min_bucket. max_depth None
    means unlimited depth.
    """
    min_bucket: int
    min_split: Optional[int] = None
    max_depth: Optional[int] = None
    complexity_penalty: float = config.DEFAULT_COMPLEXITY_PENALTY

    def __post_init__(self):
        if int(self.min_bucket) < 1:
            raise ParameterError(f"min_bucket must be at least 1 (got {self.min_bucket})")
        object.__setattr__(self, 'min_bucket', int(self.min_bucket))
        if self.min_split is None:
            object.__setattr__(self, 'min_split', config.MIN_SPLIT_FACTOR * self.min_bucket)
        if int(self.min_split) < 2:
            raise ParameterError(f"min_split must be at least 2 (got {self.min_split})")
        object.__setattr__(self, 'min_split', int(self.min_split))
        if self.max_depth is not None and int(self.max_depth) < 1:
            raise ParameterError(f"max_depth must be at least 1 (got {self.max_depth})")
        if self.complexity_penalty < 0:
            raise ParameterError(f"complexity_penalty must be non-negative (got {self.complexity_penalty})")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'min_bucket': self.min_bucket,
            'min_split': self.min_split,
            'max_depth': self.max_depth,
            'complexity_penalty': self.complexity_penalty,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TreeParams':
        return cls(**{key: data.get(key) for key in ('min_bucket', 'min_split', 'max_depth')},
                   complexity_penalty=float(data.get('complexity_penalty', 0.0)))


@dataclass(frozen=True)
class ForestParams:
    """Random forest settings; mtry is checked against the data at fit time."""
    mtry: int
    min_bucket: int
    n_trees: int = config.DEFAULT_N_TREES
    bootstrap: bool = True
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if int(self.mtry) < 1:
            raise ParameterError(f"mtry must be at least 1 (got {self.mtry})")
        if int(self.min_bucket) < 1:
            raise ParameterError(f"min_bucket must be at least 1 (got {self.min_bucket})")
        if int(self.n_trees) < 1:
            raise ParameterError(f"n_trees must be at least 1 (got {self.n_trees})")

    def tree_params(self) -> TreeParams:
        return TreeParams(min_bucket=self.min_bucket)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mtry': self.mtry,
            'min_bucket': self.min_bucket,
            'n_trees': self.n_trees,
            'bootstrap': self.bootstrap,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ForestParams':
        return cls(**data)


class BoostObjective(str, Enum):
    """Loss minimized by the boosting learner."""
    SQUARED = "squared"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class BoostParams:
    """Stagewise boosting settings."""
    max_depth: int
    n_rounds: int = config.BOOST_MAX_ROUNDS
    learning_rate: float = config.DEFAULT_LEARNING_RATE
    seed: int = config.DEFAULT_SEED
    objective: BoostObjective = BoostObjective.SQUARED

    def __post_init__(self):
        if not (0 < self.learning_rate <= 1):
            raise ParameterError(f"learning_rate must lie in (0, 1] (got {self.learning_rate})")
        if int(self.n_rounds) < 1:
            raise ParameterError(f"n_rounds must be at least 1 (got {self.n_rounds})")
        if int(self.max_depth) < 1:
            raise ParameterError(f"max_depth must be at least 1 (got {self.max_depth})")
        if not isinstance(self.objective, BoostObjective):
            object.__setattr__(self, 'objective', BoostObjective(self.objective))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_depth': self.max_depth,
            'n_rounds': self.n_rounds,
            'learning_rate': self.learning_rate,
            'seed': self.seed,
            'objective': self.objective.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BoostParams':
        return cls(**data)


# ============================================================================
# DATA-GENERATING PROCESS MODELS
# ============================================================================

@dataclass(frozen=True)
class DgpSpec:
    """
    One synthetic data-generating process.

    Attributes:
        dgp_id (int): 1, 2, 3 or 4
        n_noise (int): Standard-normal noise columns appended (0, 10, 50 or 100)
        seed (int): Generator seed
        quadratic_coef (float): DGP4 coefficient of x1 ** 2
        interaction_coef (float): DGP4 coefficient of x2 * x3
    """
    dgp_id: int
    n_noise: int = 0
    seed: int = config.DEFAULT_SEED
    quadratic_coef: float = config.DGP4_QUADRATIC_COEFFICIENT
    interaction_coef: float = config.DGP4_INTERACTION_COEFFICIENT

    def __post_init__(self):
        if self.dgp_id not in config.DGP_IDS:
            raise ParameterError(f"Unknown DGP {self.dgp_id} (expected one of {config.DGP_IDS})")
        if self.n_noise not in config.NOISE_LEVELS:
            raise ParameterError(f"n_noise must be one of {config.NOISE_LEVELS} (got {self.n_noise})")

    def with_seed(self, seed: int) -> 'DgpSpec':
        return DgpSpec(self.dgp_id, self.n_noise, seed, self.quadratic_coef, self.interaction_coef)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dgp_id': self.dgp_id,
            'n_noise': self.n_noise,
            'seed': self.seed,
            'quadratic_coef': self.quadratic_coef,
            'interaction_coef': self.interaction_coef,
        }


@dataclass(frozen=True, eq=False)
class GeneratedSample:
    """A synthetic dataset (true_prob populated) and the process that drew it."""
    dataset: Dataset
    spec: DgpSpec

    def __post_init__(self):
        if not self.dataset.has_true_prob:
            raise DomainError("A generated sample must carry true probabilities")


@dataclass(frozen=True, eq=False)
class ResampleResult:
    """
    Outcome of a rejection resampler.

    Attributes:
        indices (np.ndarray): Sorted surviving input indices
        ks_distance (float): KS distance of the survivors to the target CDF
        envelope (Optional[float]): Constant c of the one-pass resampler
        trace (Tuple[float, ...]): KS distance of the input, then after
            every rejection pass (iterative resampler only)
    """
    indices: np.ndarray
    ks_distance: float
    envelope: Optional[float] = None
    trace: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'indices', _frozen_array(self.indices, dtype=np.int64))
        object.__setattr__(self, 'trace', tuple(float(v) for v in self.trace))

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def iterations(self) -> int:
        return max(len(self.trace) - 1, 0)


# ============================================================================
# SELECTION MODELS
# ============================================================================

class CriterionKind(str, Enum):
    """Validation criterion used to pick a grid point."""
    MSE_STAR = "mse"
    AUC_STAR = "auc"
    BRIER_STAR = "brier"
    ICI_STAR = "ici"
    KL_STAR = "kl"

    @property
    def label(self) -> str:
        return f"{self.value.upper()}*"

    @property
    def maximize(self) -> bool:
        return self is CriterionKind.AUC_STAR

    @classmethod
    def parse(cls, text: str) -> 'CriterionKind':
        """Accept 'kl', 'KL*' or 'KL_STAR'."""
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().rstrip('*').removesuffix('_star')
        try:
            return cls(key)
        except ValueError:
            allowed = ", ".join(c.value for c in cls)
            raise ParameterError(f"Unknown criterion '{text}' (expected one of: {allowed})") from None


ALL_CRITERIA: Tuple[CriterionKind, ...] = tuple(CriterionKind)


class LearnerKind(str, Enum):
    TREE = "tree"
    FOREST = "forest"
    BOOST = "boost"


@dataclass(frozen=True)
class GridPoint:
    """
    One hyperparameter combination, identified by its enumeration index.

    Unused fields stay None (a tree point has no mtry).
    """
    index: int
    learner: LearnerKind
    min_bucket: Optional[int] = None
    mtry: Optional[int] = None
    max_depth: Optional[int] = None
    n_rounds: Optional[int] = None

    def label(self) -> str:
        parts = [
            f"{name}={getattr(self, name)}"
            for name in ('mtry', 'min_bucket', 'max_depth', 'n_rounds')
            if getattr(self, name) is not None
        ]
        return ",".join(parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learner': self.learner.value,
            'min_bucket': self.min_bucket,
            'mtry': self.mtry,
            'max_depth': self.max_depth,
            'n_rounds': self.n_rounds,
        }


@dataclass(frozen=True)
class GridSpec:
    """
    Hyperparameter grid for one learner.

    Tree points vary min_bucket. Forest points vary mtry (outer) and
    min_bucket (inner). Boosting points vary max_depth (outer) and the
    number of rounds 1..n_rounds (inner), all read from one staged fit per
    depth.
    """
    learner: LearnerKind
    min_bucket: Tuple[int, ...] = ()
    mtry: Tuple[int, ...] = ()
    max_depth: Tuple[int, ...] = ()
    n_rounds: int = config.BOOST_MAX_ROUNDS
    n_trees: int = config.DEFAULT_N_TREES
    learning_rate: float = config.DEFAULT_LEARNING_RATE

    def __post_init__(self):
        if not isinstance(self.learner, LearnerKind):
            object.__setattr__(self, 'learner', LearnerKind(self.learner))
        for name in ('min_bucket', 'mtry', 'max_depth'):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))

        if self.learner is LearnerKind.TREE and not self.min_bucket:
            raise ParameterError("A tree grid needs at least one min_bucket value")
        if self.learner is LearnerKind.FOREST and not (self.min_bucket and self.mtry):
            raise ParameterError("A forest grid needs mtry and min_bucket values")
        if self.learner is LearnerKind.BOOST:
            if not self.max_depth:
                raise ParameterError("A boosting grid needs at least one max_depth value")
            if int(self.n_rounds) < 1:
                raise ParameterError(f"n_rounds must be at least 1 (got {self.n_rounds})")
        if any(v < 1 for v in self.min_bucket + self.mtry + self.max_depth):
            raise ParameterError("Grid values must be positive integers")

    @classmethod
    def default(cls, learner: LearnerKind, n_features: int) -> 'GridSpec':
        """Default grid; forest mtry values above n_features are dropped."""
        learner = LearnerKind(learner)
        if learner is LearnerKind.TREE:
            return cls(learner, min_bucket=config.min_bucket_sequence(*config.TREE_MIN_BUCKET_EXPONENTS))
        if learner is LearnerKind.FOREST:
            mtry = tuple(m for m in config.FOREST_MTRY_VALUES if 1 <= m <= n_features) or (n_features,)
            return cls(
                learner,
                min_bucket=config.min_bucket_sequence(*config.FOREST_MIN_BUCKET_EXPONENTS),
                mtry=mtry,
            )
        return cls(learner, max_depth=config.BOOST_DEPTHS)

    def points(self) -> List[GridPoint]:
        """All grid points in declared enumeration order."""
        points: List[GridPoint] = []
        if self.learner is LearnerKind.TREE:
            for mb in self.min_bucket:
                points.append(GridPoint(len(points), self.learner, min_bucket=mb))
        elif self.learner is LearnerKind.FOREST:
            for m in self.mtry:
                for mb in self.min_bucket:
                    points.append(GridPoint(len(points), self.learner, min_bucket=mb, mtry=m))
        else:
            for depth in self.max_depth:
                for rounds in range(1, self.n_rounds + 1):
                    points.append(GridPoint(len(points), self.learner, max_depth=depth, n_rounds=rounds))
        return points

    def __len__(self) -> int:
        if self.learner is LearnerKind.TREE:
            return len(self.min_bucket)
        if self.learner is LearnerKind.FOREST:
            return len(self.mtry) * len(self.min_bucket)
        return len(self.max_depth) * self.n_rounds

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learner': self.learner.value,
            'min_bucket': list(self.min_bucket),
            'mtry': list(self.mtry),
            'max_depth': list(self.max_depth),
            'n_rounds': self.n_rounds,
            'n_trees': self.n_trees,
            'learning_rate': self.learning_rate,
        }


@dataclass(frozen=True)
class CandidateResult:
    """Validation metrics of one fitted grid point."""
    point: GridPoint
    validation: MetricTable
    leaf_count: float


@dataclass(frozen=True)
class SelectedModel:
    """
    A grid point chosen by a criterion (or an extreme / reference row).

    Attributes:
        name (str): Row label ('AUC*', 'KL*', 'smallest', 'GLM', ...)
        point (Optional[GridPoint]): Chosen hyperparameters (None for GLM)
        leaf_count (float): Leaves of the chosen model
        validation (MetricTable): Metrics on the validation split
        test (MetricTable): Metrics on the test split
        validation_value (Optional[float]): Criterion value that won
    """
    name: str
    point: Optional[GridPoint]
    leaf_count: float
    validation: MetricTable
    test: MetricTable
    validation_value: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'params': None if self.point is None else self.point.label(),
            'leaf_count': self.leaf_count,
            'validation_value': self.validation_value,
            'validation': self.validation.to_dict(),
            'test': self.test.to_dict(),
        }


DELTA_METRICS: Tuple[str, ...] = ('auc', 'brier', 'ici', 'kl', 'qr')


@dataclass(frozen=True)
class SelectionReport:
    """
    Result of one grid search under several criteria.

    Attributes:
        learner (LearnerKind): Learner the grid was built for
        rows (Tuple[SelectedModel, ...]): Criterion rows, then extreme rows,
            then the reference model row when present
        reference (str): 'true_probabilities' or 'beta_prior'
        prior (Optional[BetaPrior]): Fitted prior on the real-data path
        histograms (Dict[str, ScoreHistogram]): Test-score histogram per row
            name plus 'reference'
        candidates (Tuple[CandidateResult, ...]): Validation results of every
            grid point, in grid order
    """
    learner: LearnerKind
    rows: Tuple[SelectedModel, ...]
    reference: str
    prior: Optional[BetaPrior] = None
    histograms: Dict[str, ScoreHistogram] = field(default_factory=dict)
    candidates: Tuple[CandidateResult, ...] = ()

    def row(self, name: str) -> SelectedModel:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def has_row(self, name: str) -> bool:
        return any(row.name == name for row in self.rows)

    def __iter__(self) -> Iterator[SelectedModel]:
        return iter(self.rows)

    def _deltas(self, split: str) -> Dict[str, float]:
        kl_row = self.row(CriterionKind.KL_STAR.label)
        auc_row = self.row(CriterionKind.AUC_STAR.label)
        return {
            name: getattr(kl_row, split).get(name) - getattr(auc_row, split).get(name)
            for name in DELTA_METRICS
        }

    @property
    def deltas(self) -> Dict[str, float]:
        """X(KL*) - X(AUC*) on the test split; empty without both rows."""
        if not (self.has_row(CriterionKind.KL_STAR.label) and self.has_row(CriterionKind.AUC_STAR.label)):
            return {}
        return self._deltas('test')

    @property
    def validation_deltas(self) -> Dict[str, float]:
        if not (self.has_row(CriterionKind.KL_STAR.label) and self.has_row(CriterionKind.AUC_STAR.label)):
            return {}
        return self._deltas('validation')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learner': self.learner.value,
            'reference': self.reference,
            'prior': None if self.prior is None else self.prior.to_dict(),
            'rows': [row.to_dict() for row in self.rows],
            'deltas': self.deltas,
            'validation_deltas': self.validation_deltas,
        }
