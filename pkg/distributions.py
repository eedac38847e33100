#!/usr/bin/env python3
"""
scoreshape - Distributions Module

Score histograms on [0, 1], their KL divergence, the Kolmogorov-Smirnov
distance of a sample to a CDF, maximum-likelihood Beta fitting and the
Beta-kernel density estimator used by the rejection resamplers.

KL CONVENTION:
==============
The raw KL between two histograms is undefined when the reference
has an empty bin the scores occupy. kl_divergence therefore adds a
pseudo-count (config.KL_PSEUDO_COUNT, default 1) to every raw bin count of
both histograms before normalizing. pseudo_count=0 restores the raw
definition, with +inf for unsupported bins.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

import config
from errors import DimensionError, DomainError, NumericError
from models import BetaPrior, ScoreHistogram

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray, list]


def _unit_interval_values(values: ArrayLike, what: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64).ravel()
    if array.size == 0:
        raise DomainError(f"{what} must be nonempty")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{what} contain NaN or infinite values")
    if np.any((array < 0.0) | (array > 1.0)):
        bad = array[(array < 0.0) | (array > 1.0)][0]
        raise DomainError(f"{what} must lie in [0, 1] (found {bad})")
    return array


# ============================================================================
# HISTOGRAMS AND KL DIVERGENCE
# ============================================================================

def histogram(values: ArrayLike, bin_count: int = config.DEFAULT_BIN_COUNT) -> ScoreHistogram:
    """
    Equal-width histogram of values in [0, 1].

    Value v goes to bin floor(v * m); 1.0 goes to the last bin.

    Raises:
        DomainError: Empty input or a value outside [0, 1]

    Examples:
        >>> histogram([0.0, 0.5, 1.0], bin_count=2).proportions.tolist()
        [0.3333333333333333, 0.6666666666666666]
    """
    if bin_count < 1:
        raise DimensionError(f"bin_count must be positive (got {bin_count})")
    array = _unit_interval_values(values, "histogram values")
    bins = np.minimum(np.floor(array * bin_count).astype(np.int64), bin_count - 1)
    counts = np.bincount(bins, minlength=bin_count)
    return ScoreHistogram(proportions=counts / array.size, sample_size=array.size)


def smoothed_proportions(h: ScoreHistogram, pseudo_count: float = config.KL_PSEUDO_COUNT) -> np.ndarray:
    """Proportions after adding pseudo_count to every raw bin count."""
    counts = h.counts
    return (counts + pseudo_count) / (counts.sum() + pseudo_count * h.bin_count)


def kl_divergence(
    phi: ScoreHistogram,
    g: ScoreHistogram,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
) -> float:
    """
    KL(phi || g) = sum_i phi_i log(phi_i / g_i) over smoothed histograms.

    Terms with phi_i = 0 contribute 0.

    Raises:
        DimensionError: If the bin counts differ
    """
    if phi.bin_count != g.bin_count:
        raise DimensionError(f"Histogram bin counts differ ({phi.bin_count} vs {g.bin_count})")
    if pseudo_count < 0:
        raise DomainError(f"pseudo_count must be non-negative (got {pseudo_count})")

    if pseudo_count == 0:
        p, q = phi.proportions, g.proportions
    else:
        p, q = smoothed_proportions(phi, pseudo_count), smoothed_proportions(g, pseudo_count)
    return float(np.sum(special.rel_entr(p, q)))


# ============================================================================
# KOLMOGOROV-SMIRNOV DISTANCE
# ============================================================================

def ks_distance(sample: ArrayLike, target_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    sup_t |F_n(t) - G(t)| for a sample in [0, 1] and a continuous CDF G.

    Both one-sided gaps are checked at every sample point, covering the left
    and right limits of the empirical CDF.

    Examples:
        >>> ks_distance([0.1, 0.2, 0.3, 0.4, 0.5], lambda t: t)
        0.5
    """
    x = np.sort(_unit_interval_values(sample, "KS sample"))
    n = x.size
    cdf = np.clip(np.asarray(target_cdf(x), dtype=np.float64), 0.0, 1.0)
    ranks = np.arange(1, n + 1)
    d_plus = np.max(ranks / n - cdf)
    d_minus = np.max(cdf - (ranks - 1) / n)
    return float(np.clip(max(d_plus, d_minus), 0.0, 1.0))


# ============================================================================
# BETA MAXIMUM LIKELIHOOD
# ============================================================================

def beta_method_of_moments(mean: float, variance: float) -> Tuple[float, float]:
    """
    Moment estimates alpha = m * c, beta = (1 - m) * c with c = m(1-m)/v - 1.

    Falls back to (1, 1) when c is not positive.

    Examples:
        >>> [round(v, 12) for v in beta_method_of_moments(0.4, 0.04)]
        [2.0, 3.0]
    """
    common = mean * (1.0 - mean) / variance - 1.0
    if not (common > 0 and np.isfinite(common)):
        logger.debug(f"Moment start undefined (mean={mean}, var={variance}); using Beta(1, 1)")
        return 1.0, 1.0
    return mean * common, (1.0 - mean) * common


def beta_log_likelihood(scores: ArrayLike, alpha: float, beta: float, clip: float = config.BETA_CLIP) -> float:
    """Total Beta(alpha, beta) log-likelihood of scores clipped to [clip, 1 - clip]."""
    x = np.clip(np.asarray(scores, dtype=np.float64), clip, 1.0 - clip)
    return float(
        np.sum(special.xlogy(alpha - 1.0, x) + special.xlog1py(beta - 1.0, -x)) - x.size * special.betaln(alpha, beta)
    )


def fit_beta_mle(
    scores: ArrayLike,
    clip: float = config.BETA_CLIP,
    tolerance: float = config.BETA_GRADIENT_TOLERANCE,
    max_iterations: int = config.BETA_MAX_ITERATIONS,
) -> BetaPrior:
    """
    Fit Beta(alpha, beta) to scores by maximum likelihood.

    Newton iterations on the two score equations start at the method-of-
    moments estimate. Steps are halved until both shapes stay positive and
    the log-likelihood does not decrease. Iteration stops when the gradient
    norm (per observation) falls below tolerance or after max_iterations.

    Args:
        scores: Values in [0, 1]; clipped to [clip, 1 - clip] first
        clip: Clipping bound keeping log(x) and log(1 - x) finite

    Returns:
        BetaPrior: Fitted shapes with the total log-likelihood

    Raises:
        DomainError: Fewer than BETA_MIN_OBSERVATIONS scores, values outside
            [0, 1], or zero variance (the likelihood is then unbounded)
        NumericError: The likelihood or an iterate becomes non-finite
    """
    x = _unit_interval_values(scores, "Beta scores")
    if x.size < config.BETA_MIN_OBSERVATIONS:
        raise DomainError(
            f"Beta MLE needs at least {config.BETA_MIN_OBSERVATIONS} scores (got {x.size})"
        )
    x = np.clip(x, clip, 1.0 - clip)
    variance = float(np.var(x))
    if variance <= 0.0:
        raise DomainError(
            f"All {x.size} scores equal {x[0]:.6g}; the Beta likelihood is unbounded, "
            f"so no maximum-likelihood prior exists"
        )

    mean_log = float(np.mean(np.log(x)))
    mean_log1m = float(np.mean(np.log1p(-x)))
    if not (np.isfinite(mean_log) and np.isfinite(mean_log1m)):
        raise NumericError("Beta log-likelihood is not finite after clipping")

    def loglik(a: float, b: float) -> float:
        return (a - 1.0) * mean_log + (b - 1.0) * mean_log1m - special.betaln(a, b)

    def gradient_at(a: float, b: float) -> np.ndarray:
        psi_ab = special.digamma(a + b)
        return np.array([mean_log - special.digamma(a) + psi_ab, mean_log1m - special.digamma(b) + psi_ab])

    a, b = beta_method_of_moments(float(np.mean(x)), variance)
    current = loglik(a, b)
    gradient = gradient_at(a, b)
    if not (np.isfinite(current) and np.all(np.isfinite(gradient))):
        raise NumericError(f"Beta log-likelihood is not finite at the moment start ({a}, {b})")
    steps = 0

    while np.linalg.norm(gradient) >= tolerance and steps < max_iterations:
        if not np.all(np.isfinite(gradient)):
            raise NumericError(f"Non-finite Beta gradient at alpha={a}, beta={b}")

        trigamma_ab = special.polygamma(1, a + b)
        hessian = np.array([
            [trigamma_ab - special.polygamma(1, a), trigamma_ab],
            [trigamma_ab, trigamma_ab - special.polygamma(1, b)],
        ])
        step = -np.linalg.solve(hessian, gradient)

        scale = 1.0
        for _ in range(60):
            a_new, b_new = a + scale * step[0], b + scale * step[1]
            if a_new > 0 and b_new > 0:
                candidate = loglik(a_new, b_new)
                if np.isfinite(candidate) and candidate >= current - 1e-14 * abs(current):
                    break
            scale *= 0.5
        else:
            # no ascent left at double precision
            logger.debug(f"Beta Newton line search stalled after {steps} steps")
            break

        a, b, current = a_new, b_new, candidate
        gradient = gradient_at(a, b)
        steps += 1
        logger.debug(f"Beta Newton step {steps}: alpha={a:.8f}, beta={b:.8f}, |grad|={np.linalg.norm(gradient):.3e}")

    if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(current)):
        raise NumericError(f"Beta MLE diverged (alpha={a}, beta={b})")
    converged = bool(np.linalg.norm(gradient) < tolerance)
    if not converged:
        logger.warning(
            f"Beta MLE stopped after {steps} steps with gradient norm "
            f"{np.linalg.norm(gradient):.3e} (tolerance {tolerance:g})"
        )

    return BetaPrior(
        alpha=a,
        beta=b,
        log_likelihood=float(current * x.size),
        iterations=steps,
        converged=converged,
    )


# ============================================================================
# BETA-KERNEL DENSITY
# ============================================================================

def default_bandwidth(n: int) -> float:
    return float(n) ** config.BANDWIDTH_EXPONENT


@dataclass(frozen=True, eq=False)
class BetaKernelDensity:
    """
    Beta-kernel density estimate on [0, 1].

    The density at t averages Beta(s_j; t/b + 1, (1 - t)/b + 1) over the
    sample, so kernels never leak mass outside the unit interval.

    Attributes:
        sample (np.ndarray): Observations in [0, 1]
        bandwidth (float): b > 0
    """
    sample: np.ndarray
    bandwidth: float

    def __post_init__(self):
        sample = _unit_interval_values(self.sample, "density sample").copy()
        sample.setflags(write=False)
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise DomainError(f"bandwidth must be positive (got {self.bandwidth})")
        object.__setattr__(self, 'sample', sample)
        object.__setattr__(self, 'bandwidth', float(self.bandwidth))

    def _direct(self, points: np.ndarray) -> np.ndarray:
        n = self.sample.size
        s_row = self.sample[np.newaxis, :]
        out = np.empty(points.size)
        chunk = max(1, config.KDE_DIRECT_LIMIT // (8 * n))
        for start in range(0, points.size, chunk):
            t = points[start:start + chunk, np.newaxis]
            a_minus_1 = t / self.bandwidth
            b_minus_1 = (1.0 - t) / self.bandwidth
            log_pdf = (
                special.xlogy(a_minus_1, s_row)
                + special.xlog1py(b_minus_1, -s_row)
                - special.betaln(a_minus_1 + 1.0, b_minus_1 + 1.0)
            )
            out[start:start + chunk] = np.exp(log_pdf).mean(axis=1)
        return out

    def evaluate(self, s: ArrayLike) -> Union[float, np.ndarray]:
        """
        Density at s (scalar or array).

        Large requests are answered from a KDE_GRID_SIZE grid with linear
        interpolation.

        Raises:
            DomainError: If any point is outside [0, 1]
        """
        scalar = np.ndim(s) == 0
        points = _unit_interval_values(s, "density evaluation points")
        if points.size * self.sample.size > config.KDE_DIRECT_LIMIT and points.size > config.KDE_GRID_SIZE:
            grid = np.linspace(0.0, 1.0, config.KDE_GRID_SIZE)
            values = np.interp(points, grid, self._direct(grid))
        else:
            values = self._direct(points)
        values = np.maximum(values, 0.0)
        return float(values[0]) if scalar else values

    __call__ = evaluate

    def integral(self, points: int = config.KDE_INTEGRATION_POINTS) -> float:
        """Trapezoid integral over an even grid on [0, 1]."""
        grid = np.linspace(0.0, 1.0, points)
        return float(integrate.trapezoid(self._direct(grid), grid))


def beta_kernel_density(sample: ArrayLike, bandwidth: Optional[float] = None) -> BetaKernelDensity:
    """Beta-kernel density of sample; bandwidth defaults to n ** (-2/5)."""
    sample = np.asarray(sample, dtype=np.float64).ravel()
    if bandwidth is None:
        bandwidth = default_bandwidth(max(sample.size, 1))
    return BetaKernelDensity(sample=sample, bandwidth=bandwidth)
