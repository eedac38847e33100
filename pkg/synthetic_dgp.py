#!/usr/bin/env python3
"""
scoreshape - Synthetic Data-Generating Processes

Four logistic-link processes with standard-normal continuous predictors:

    DGP1  eta = 0.5 x1 + 1.0 x2                          p = sigmoid(eta)
    DGP2  as DGP1                                        p = sigmoid(eta) ** 3
    DGP3  five continuous and five categorical inputs    p = sigmoid(eta)
    DGP4  eta = 0.5 x1 + 1.0 x2 + 0.3 x3
                + b4 x1 ** 2 + b5 x2 x3                  p = sigmoid(eta)

DGP3 categoricals are uniform over (2, 2, 3, 5, 5) levels; each enters eta
as its level number (1..k) times its coefficient and is materialized as
one-hot indicator columns. Optional standard-normal noise columns are
appended, then Y ~ Bernoulli(p).

The module also holds the two rejection resamplers that reshape a sample so
its scores follow a target density, and the DGP4 variant resampled toward
the probability distribution of DGP1.
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from scipy import special

import config
from distributions import beta_kernel_density, fit_beta_mle, ks_distance
from errors import ParameterError, ResamplingError
from models import CategoricalGroup, Dataset, DgpSpec, GeneratedSample, ResampleResult

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

DensityFunction = Callable[[np.ndarray], np.ndarray]


# ============================================================================
# GENERATION
# ============================================================================

def generate(spec: DgpSpec, n: int) -> GeneratedSample:
    """
    Draw n observations from the process described by spec.

    Draw order is fixed (continuous inputs, categorical inputs, noise,
    outcomes), so a spec and n always reproduce the same sample.

    Raises:
        ParameterError: If n < 1
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1 (got {n})")
    rng = np.random.default_rng(spec.seed)

    blocks: List[np.ndarray] = []
    names: List[str] = []
    groups: List[CategoricalGroup] = []

    if spec.dgp_id in (1, 2):
        x = rng.standard_normal((n, 2))
        eta = x @ np.asarray(config.DGP1_COEFFICIENTS)
        blocks.append(x)
        names += ["x1", "x2"]

    elif spec.dgp_id == 3:
        beta_cont = np.asarray(config.DGP3_CONTINUOUS_COEFFICIENTS)
        x = rng.standard_normal((n, beta_cont.size))
        eta = x @ beta_cont
        blocks.append(x)
        names += [f"x{j + 1}" for j in range(beta_cont.size)]

        for j, (levels, coef) in enumerate(
            zip(config.DGP3_CATEGORICAL_LEVELS, config.DGP3_CATEGORICAL_COEFFICIENTS), start=1
        ):
            level = rng.integers(1, levels + 1, size=n)
            eta = eta + coef * level
            indicators = (level[:, np.newaxis] == np.arange(1, levels + 1)).astype(np.float64)
            offset = len(names)
            labels = tuple(str(k) for k in range(1, levels + 1))
            groups.append(CategoricalGroup(f"c{j}", labels, tuple(range(offset, offset + levels))))
            blocks.append(indicators)
            names += [f"c{j}={label}" for label in labels]

    else:
        beta_lin = np.asarray(config.DGP4_LINEAR_COEFFICIENTS)
        x = rng.standard_normal((n, beta_lin.size))
        eta = (
            x @ beta_lin
            + spec.quadratic_coef * x[:, 0] ** 2
            + spec.interaction_coef * x[:, 1] * x[:, 2]
        )
        blocks.append(x)
        names += ["x1", "x2", "x3"]

    if spec.n_noise:
        blocks.append(rng.standard_normal((n, spec.n_noise)))
        names += [f"noise{j + 1}" for j in range(spec.n_noise)]

    p = special.expit(eta)
    if spec.dgp_id == 2:
        p = p ** 3
    y = (rng.random(n) < p).astype(np.float64)

    dataset = Dataset(
        features=np.hstack(blocks),
        target=y,
        true_prob=p,
        feature_names=tuple(names),
        categorical_groups=tuple(groups),
    )
    logger.debug(
        f"Generated DGP{spec.dgp_id} n={n} noise={spec.n_noise} seed={spec.seed}: "
        f"event rate {y.mean():.4f}, mean p {p.mean():.4f}"
    )
    return GeneratedSample(dataset=dataset, spec=spec)


# ============================================================================
# REJECTION RESAMPLING
# ============================================================================

def _envelope_points(scores: np.ndarray) -> np.ndarray:
    grid = np.arange(1, config.SUP_GRID_SIZE + 1) / (config.SUP_GRID_SIZE + 1)
    return np.concatenate([scores, grid])


def resample_rejection(
    scores: np.ndarray,
    target_pdf: DensityFunction,
    target_cdf: DensityFunction,
    seed: int = config.DEFAULT_SEED,
    bandwidth: Optional[float] = None,
    c_max: float = config.RESAMPLE_C_MAX,
) -> ResampleResult:
    """
    One-pass rejection subsampling toward the density g.

    With phi the Beta-kernel density of the scores, observation i is kept
    with probability g(s_i) / (c * phi(s_i)), where c is the largest ratio
    g / phi over the scores and an interior grid of [0, 1]. When g = phi
    every observation is kept with the same probability 1 / c.

    Raises:
        ResamplingError: If c is non-finite or exceeds c_max (use
            resample_iterative instead), or nothing survives
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    density = beta_kernel_density(s, bandwidth)

    points = _envelope_points(s)
    target = np.asarray(target_pdf(points), dtype=np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(target == 0.0, 0.0, target / density(points))
    c = float(np.max(ratios))
    diagnostics = {'c': c, 'c_max': c_max, 'n': int(s.size)}
    if not np.isfinite(c) or c > c_max:
        raise ResamplingError(
            f"Envelope constant c={c:.4g} is not finite or exceeds {c_max:g}; "
            f"use the iterative resampler (resample_iterative) instead",
            diagnostics=diagnostics,
        )
    if c <= 0:
        raise ResamplingError("Target density is zero on the whole sample", diagnostics=diagnostics)

    accept = ratios[: s.size] / c
    rng = np.random.default_rng(seed)
    kept = np.flatnonzero(rng.random(s.size) < accept)
    if kept.size == 0:
        raise ResamplingError("Rejection step kept no observations", diagnostics=diagnostics)

    distance = ks_distance(s[kept], target_cdf)
    logger.info(f"Rejection resampling kept {kept.size}/{s.size} (c={c:.4g}, KS={distance:.4f})")
    return ResampleResult(indices=kept, ks_distance=distance, envelope=c)


def resample_iterative(
    scores: np.ndarray,
    target_pdf: DensityFunction,
    target_cdf: DensityFunction,
    epsilon: float,
    seed: int = config.DEFAULT_SEED,
    bandwidth: Optional[float] = None,
    floor: int = config.SURVIVOR_FLOOR,
    max_iterations: int = config.RESAMPLE_MAX_ITERATIONS,
) -> ResampleResult:
    """
    Repeated rejection until the survivors are within epsilon (KS) of G.

    Each pass re-estimates the density phi of the survivors and keeps
    survivor i with probability min(1, g(s_i) / phi(s_i)).

    Args:
        scores: Sample of at least RESAMPLE_MIN_SAMPLE values in [0, 1]
        target_pdf, target_cdf: Target density g and its CDF G
        epsilon: KS tolerance in (0, 0.5]
        floor: Survivor count below which the search gives up

    Returns:
        ResampleResult: survivors with the KS trace (input distance first)

    Raises:
        ParameterError: Invalid epsilon or too small a sample
        ResamplingError: Survivors fell below floor, or max_iterations was
            reached; diagnostics carry the best KS distance seen
    """
    if not (0 < epsilon <= 0.5):
        raise ParameterError(f"epsilon must lie in (0, 0.5] (got {epsilon})")
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size < config.RESAMPLE_MIN_SAMPLE:
        raise ParameterError(
            f"Iterative resampling needs at least {config.RESAMPLE_MIN_SAMPLE} observations (got {s.size})"
        )

    rng = np.random.default_rng(seed)
    survivors = np.arange(s.size)
    distance = ks_distance(s, target_cdf)
    trace = [distance]
    best = distance

    while distance > epsilon:
        if len(trace) > max_iterations:
            raise ResamplingError(
                f"No KS distance <= {epsilon} after {max_iterations} passes (best {best:.4f})",
                diagnostics={'best_ks': best, 'survivors': int(survivors.size), 'trace': trace},
            )
        current = s[survivors]
        density = beta_kernel_density(current, bandwidth)
        with np.errstate(divide='ignore', invalid='ignore'):
            accept = np.minimum(1.0, np.asarray(target_pdf(current), dtype=np.float64) / density(current))
        accept = np.nan_to_num(accept, nan=0.0)
        survivors = survivors[rng.random(current.size) < accept]

        if survivors.size < floor:
            raise ResamplingError(
                f"Only {survivors.size} observations survive (floor {floor}) before reaching "
                f"KS <= {epsilon}; best KS {best:.4f}",
                diagnostics={'best_ks': best, 'survivors': int(survivors.size), 'trace': trace},
            )
        distance = ks_distance(s[survivors], target_cdf)
        trace.append(distance)
        best = min(best, distance)
        logger.debug(f"Resampling pass {len(trace) - 1}: {survivors.size} survivors, KS={distance:.4f}")

    logger.info(
        f"Iterative resampling reached KS={distance:.4f} with {survivors.size}/{s.size} "
        f"survivors after {len(trace) - 1} passes"
    )
    return ResampleResult(indices=survivors, ks_distance=distance, trace=tuple(trace))


# ============================================================================
# DGP4 RESAMPLED TOWARD DGP1
# ============================================================================

def generate_resampled_dgp4(
    spec: DgpSpec,
    n: int,
    epsilon: float = 0.05,
    reference_size: int = config.REFERENCE_SAMPLE_SIZE,
) -> GeneratedSample:
    """
    DGP4 sample whose true probabilities follow DGP1's distribution.

    DGP1 probabilities drawn with the same seed are summarized by their
    maximum-likelihood Beta fit; an oversampled DGP4 draw is resampled
    toward that Beta density with resample_iterative and the first n
    survivors are returned.

    Raises:
        ParameterError: If spec is not DGP4
        ResamplingError: If fewer than n observations survive
    """
    if spec.dgp_id != 4:
        raise ParameterError(f"Resampled generation applies to DGP4 only (got DGP{spec.dgp_id})")

    reference = generate(DgpSpec(1, n_noise=0, seed=spec.seed), reference_size)
    prior = fit_beta_mle(reference.dataset.true_prob)
    logger.debug(f"DGP1 reference for DGP4 resampling: {prior}")

    pool = generate(spec, n * config.DGP4_OVERSAMPLE_FACTOR)
    result = resample_iterative(pool.dataset.true_prob, prior.pdf, prior.cdf, epsilon, seed=spec.seed)
    if result.size < n:
        raise ResamplingError(
            f"Only {result.size} DGP4 observations survive resampling; {n} requested",
            diagnostics={'survivors': result.size, 'requested': n, 'ks': result.ks_distance},
        )
    return GeneratedSample(dataset=pool.dataset.subset(result.indices[:n]), spec=spec)
