#!/usr/bin/env python3
"""
scoreshape - Configuration Module

This module centralizes every numeric default used by scoreshape: histogram
and smoothing settings, Beta-fit tolerances, calibration smoother settings,
learner defaults, hyperparameter grid sequences, data-generating process
coefficients and resampling guards.

CONFIGURATION PHILOSOPHY:
=========================
All defaults are module-level Final constants grouped by concern. Operations
take them as keyword defaults, so a caller can override any single value
without touching this file. Study-level overrides come from TOML files read
with read_toml() (see selection_harness.load_study_config and
tabular_data.load_schema).

VALIDATION AND INTEGRITY:
==========================
validate_configuration() runs on import and checks that the defaults are
mutually consistent (probability bounds inside (0, 1), positive tolerances,
split ratios summing to one, grid sequences increasing). A failure raises
RuntimeError naming the offending constant.
"""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Final, Tuple, Union

import numpy as np

__version__ = "1.0.0"

logger = logging.getLogger(__name__)


# ============================================================================
# SCORE HISTOGRAMS AND KL DIVERGENCE
# ============================================================================

# Number of equal-width bins on [0, 1] used for every score histogram
DEFAULT_BIN_COUNT: Final[int] = 20

# Pseudo-count added to every bin of both histograms before KL is computed.
# 0 disables smoothing (KL may then be infinite).
KL_PSEUDO_COUNT: Final[float] = 1.0

# Size of the quasi-random quantile sample standing in for a Beta prior
REFERENCE_SAMPLE_SIZE: Final[int] = 100_000


# ============================================================================
# BETA DISTRIBUTION FITTING
# ============================================================================

# Scores are clipped to [BETA_CLIP, 1 - BETA_CLIP] before the likelihood is
# evaluated; tree scores of exactly 0 or 1 would make it diverge
BETA_CLIP: Final[float] = 1e-6

# Minimum sample size accepted by fit_beta_mle
BETA_MIN_OBSERVATIONS: Final[int] = 10

# Newton stopping rule: gradient norm (per observation) or iteration cap
BETA_GRADIENT_TOLERANCE: Final[float] = 1e-10
BETA_MAX_ITERATIONS: Final[int] = 200


# ============================================================================
# BETA-KERNEL DENSITY ESTIMATION
# ============================================================================

# Default bandwidth b = n ** BANDWIDTH_EXPONENT
BANDWIDTH_EXPONENT: Final[float] = -0.4

# Above this many (points x sample) kernel evaluations the density is
# evaluated on a grid and linearly interpolated
KDE_DIRECT_LIMIT: Final[int] = 20_000_000
KDE_GRID_SIZE: Final[int] = 1025

# Evaluation grid used by the trapezoid normalization check
KDE_INTEGRATION_POINTS: Final[int] = 512


# ============================================================================
# CALIBRATION METRICS
# ============================================================================

# Quantile bins of the calibration curve (reliability diagram)
CALIBRATION_BINS: Final[int] = 10

# Local linear smoother behind ICI: tricube weights, LOESS default span
ICI_SPAN: Final[float] = 0.75
ICI_MIN_OBSERVATIONS: Final[int] = 20

# From this sample size on the smoother is evaluated on a grid over the
# score range and linearly interpolated
ICI_GRID_THRESHOLD: Final[int] = 1000
ICI_GRID_SIZE: Final[int] = 201

# Percentiles of the interdecile range used by the quantile ratio
QUANTILE_LOW: Final[float] = 0.10
QUANTILE_HIGH: Final[float] = 0.90


# ============================================================================
# LEARNERS
# ============================================================================

# min_split = MIN_SPLIT_FACTOR * min_bucket unless given explicitly
MIN_SPLIT_FACTOR: Final[int] = 3

# Complexity penalty (fraction of root SSE a split must remove); 0 leaves
# min_bucket as the only size control
DEFAULT_COMPLEXITY_PENALTY: Final[float] = 0.0

# Random forests
DEFAULT_N_TREES: Final[int] = 250
FOREST_MTRY_VALUES: Final[Tuple[int, ...]] = (2, 4, 6)

# Squared-loss boosting
DEFAULT_LEARNING_RATE: Final[float] = 0.3
BOOST_DEPTHS: Final[Tuple[int, ...]] = (2, 4, 6)
BOOST_MAX_ROUNDS: Final[int] = 400

# IRLS logistic regression
IRLS_TOLERANCE: Final[float] = 1e-8
IRLS_MAX_ITERATIONS: Final[int] = 50
SEPARATION_BOUND: Final[float] = 30.0

# Relative size of a QR diagonal entry below which a column is collinear
COLLINEARITY_TOLERANCE: Final[float] = 1e-10

# Version stamped into serialized models
MODEL_FORMAT_VERSION: Final[int] = 1


# ============================================================================
# HYPERPARAMETER GRIDS
# ============================================================================

# (start, stop, step) of the exponent sequence; grid = unique(round(2 ** seq))
TREE_MIN_BUCKET_EXPONENTS: Final[Tuple[float, float, float]] = (1.0, 10.0, 0.1)
FOREST_MIN_BUCKET_EXPONENTS: Final[Tuple[float, float, float]] = (1.0, 14.0, 0.4)


def min_bucket_sequence(start: float, stop: float, step: float) -> Tuple[int, ...]:
    """
    Build the deduplicated min_bucket grid round(2 ** seq(start, stop, step)).

    Rounding is half-to-even, matching the rounding rule of the statistical
    environment the grids were first written for.

    Examples:
        >>> min_bucket_sequence(1.0, 1.3, 0.1)
        (2,)
    """
    count = int(round((stop - start) / step)) + 1
    exponents = start + step * np.arange(count)
    values = np.round(2.0 ** exponents).astype(int)
    # unique() on a monotone sequence keeps declaration order
    return tuple(int(v) for v in np.unique(values))


# ============================================================================
# SYNTHETIC DATA-GENERATING PROCESSES
# ============================================================================

DGP_IDS: Final[Tuple[int, ...]] = (1, 2, 3, 4)
NOISE_LEVELS: Final[Tuple[int, ...]] = (0, 10, 50, 100)

DGP1_COEFFICIENTS: Final[Tuple[float, ...]] = (0.5, 1.0)
DGP3_CONTINUOUS_COEFFICIENTS: Final[Tuple[float, ...]] = (0.1, 0.2, 0.3, 0.4, 0.5)
DGP3_CATEGORICAL_COEFFICIENTS: Final[Tuple[float, ...]] = (0.01, 0.02, 0.03, 0.04, 0.05)
DGP3_CATEGORICAL_LEVELS: Final[Tuple[int, ...]] = (2, 2, 3, 5, 5)
DGP4_LINEAR_COEFFICIENTS: Final[Tuple[float, ...]] = (0.5, 1.0, 0.3)

# Coefficients of x1 ** 2 and x2 * x3 in DGP4; not given with the original
# coefficient table, overridable per DgpSpec
DGP4_QUADRATIC_COEFFICIENT: Final[float] = 0.5
DGP4_INTERACTION_COEFFICIENT: Final[float] = 0.5


# ============================================================================
# REJECTION RESAMPLING
# ============================================================================

# Largest envelope constant the one-pass rejection resampler accepts
RESAMPLE_C_MAX: Final[float] = 1e3

# Interior grid (k / (SUP_GRID_SIZE + 1)) over which the envelope sup is taken
SUP_GRID_SIZE: Final[int] = 199

# Iterative resampler guards
RESAMPLE_MIN_SAMPLE: Final[int] = 100
SURVIVOR_FLOOR: Final[int] = 50
RESAMPLE_MAX_ITERATIONS: Final[int] = 200

# DGP4 is drawn this many times larger than requested before resampling
DGP4_OVERSAMPLE_FACTOR: Final[int] = 10


# ============================================================================
# SPLITS, INGESTION AND STUDIES
# ============================================================================

SIMULATION_RATIOS: Final[Tuple[float, float, float]] = (1 / 3, 1 / 3, 1 / 3)
REAL_DATA_RATIOS: Final[Tuple[float, float, float]] = (0.64, 0.16, 0.20)
RATIO_TOLERANCE: Final[float] = 1e-9

MAX_CATEGORICAL_LEVELS: Final[int] = 64

DEFAULT_REPLICATIONS: Final[int] = 10
DEFAULT_N_PER_SPLIT: Final[int] = 10_000
DEFAULT_SEED: Final[int] = 1


# ============================================================================
# RUNTIME
# ============================================================================

THREADS_ENV_VAR: Final[str] = "SCORESHAPE_THREADS"


def worker_count() -> int:
    """
    Number of worker threads for parallel fitting.

    Defaults to the CPU count; SCORESHAPE_THREADS caps it. Results never
    depend on this number.
    """
    available = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return available
    try:
        cap = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
        return available
    return max(1, min(available, cap))


def read_toml(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML configuration file.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the file is not valid TOML
    """
    path = Path(path)
    logger.debug(f"Reading configuration file {path}")
    with path.open("rb") as handle:
        try:
            return tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise ValueError(f"Invalid TOML in {path}: {e}") from e


# ============================================================================
# CONFIGURATION VALIDATION
# ============================================================================

def validate_configuration() -> None:
    """
    Validate configuration integrity and consistency.

    Raises:
        ValueError: If any validation check fails
        TypeError: If configuration values have wrong types
    """
    if DEFAULT_BIN_COUNT < 2:
        raise ValueError(f"DEFAULT_BIN_COUNT must be at least 2 (got {DEFAULT_BIN_COUNT})")

    if KL_PSEUDO_COUNT < 0:
        raise ValueError(f"KL_PSEUDO_COUNT must be non-negative (got {KL_PSEUDO_COUNT})")

    if not (0 < BETA_CLIP < 0.5):
        raise ValueError(f"BETA_CLIP must lie in (0, 0.5) (got {BETA_CLIP})")

    for name, value in (
        ("BETA_GRADIENT_TOLERANCE", BETA_GRADIENT_TOLERANCE),
        ("IRLS_TOLERANCE", IRLS_TOLERANCE),
        ("COLLINEARITY_TOLERANCE", COLLINEARITY_TOLERANCE),
    ):
        if value <= 0:
            raise ValueError(f"{name} must be positive (got {value})")

    if not (0 < ICI_SPAN <= 1):
        raise ValueError(f"ICI_SPAN must lie in (0, 1] (got {ICI_SPAN})")

    if not (0 <= QUANTILE_LOW < QUANTILE_HIGH <= 1):
        raise ValueError(
            f"Quantile bounds must satisfy 0 <= low < high <= 1 "
            f"(got {QUANTILE_LOW}, {QUANTILE_HIGH})"
        )

    if not (0 < DEFAULT_LEARNING_RATE <= 1):
        raise ValueError(f"DEFAULT_LEARNING_RATE must lie in (0, 1] (got {DEFAULT_LEARNING_RATE})")

    for name, seq in (
        ("TREE_MIN_BUCKET_EXPONENTS", TREE_MIN_BUCKET_EXPONENTS),
        ("FOREST_MIN_BUCKET_EXPONENTS", FOREST_MIN_BUCKET_EXPONENTS),
    ):
        start, stop, step = seq
        if step <= 0 or stop < start:
            raise ValueError(f"{name} must be an increasing sequence (got {seq})")

    for name, ratios in (
        ("SIMULATION_RATIOS", SIMULATION_RATIOS),
        ("REAL_DATA_RATIOS", REAL_DATA_RATIOS),
    ):
        if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > RATIO_TOLERANCE:
            raise ValueError(f"{name} must be positive and sum to 1 (got {ratios})")

    if len(DGP3_CATEGORICAL_LEVELS) != len(DGP3_CATEGORICAL_COEFFICIENTS):
        raise ValueError("DGP3 needs one coefficient per categorical predictor")

    for levels in DGP3_CATEGORICAL_LEVELS:
        if not isinstance(levels, int) or levels < 2:
            raise TypeError(f"DGP3 categorical level counts must be integers >= 2 (got {levels})")

    if SURVIVOR_FLOOR >= RESAMPLE_MIN_SAMPLE:
        raise ValueError("SURVIVOR_FLOOR must be smaller than RESAMPLE_MIN_SAMPLE")

    if RESAMPLE_C_MAX <= 1:
        raise ValueError(f"RESAMPLE_C_MAX must exceed 1 (got {RESAMPLE_C_MAX})")


# ============================================================================
# MODULE INITIALIZATION
# ============================================================================

try:
    validate_configuration()
except (ValueError, TypeError) as e:
    raise RuntimeError(
        f"Configuration validation failed: {e}\n"
        f"Please check config.py for errors."
    ) from e


def print_config_summary() -> str:
    """Generate a human-readable summary of the main defaults."""
    lines = [
        f"scoreshape configuration (v{__version__})",
        "=" * 60,
        f"  Histogram bins:           {DEFAULT_BIN_COUNT}",
        f"  KL pseudo-count:          {KL_PSEUDO_COUNT}",
        f"  Beta clip:                {BETA_CLIP}",
        f"  ICI span / grid:          {ICI_SPAN} / {ICI_GRID_SIZE}",
        f"  Trees per forest:         {DEFAULT_N_TREES}",
        f"  Boosting rate / rounds:   {DEFAULT_LEARNING_RATE} / {BOOST_MAX_ROUNDS}",
        f"  Tree min_bucket grid:     {len(min_bucket_sequence(*TREE_MIN_BUCKET_EXPONENTS))} values",
        f"  Forest min_bucket grid:   {len(min_bucket_sequence(*FOREST_MIN_BUCKET_EXPONENTS))} values",
        f"  Worker threads:           {worker_count()}",
        "=" * 60,
    ]
    return "\n".join(lines)


if __name__ == "__main__":
    print(print_config_summary())
