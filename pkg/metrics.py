#!/usr/bin/env python3
"""
scoreshape - Metrics Module

Performance and calibration metrics for binary scores: AUC, Brier score,
quantile-binned calibration curve, the integrated calibration index (ICI),
mean squared error against true probabilities and the interdecile quantile
ratio. compute_metric_table bundles them into one MetricTable row.

ICI SMOOTHER:
=============
The calibration function is estimated by local linear regression of labels
on scores with tricube weights over the nearest ceil(span * n) points
(span 0.75). Below ICI_GRID_THRESHOLD observations it is evaluated at every
score; above, on ICI_GRID_SIZE points spanning the score range with linear
interpolation in between. Estimates are clipped to [0, 1].
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy import stats

import config
from distributions import histogram, kl_divergence
from errors import DimensionError, DomainError, ParameterError
from models import CalibrationCurve, IciEstimate, MetricTable, ScoreHistogram

__version__ = "1.0.0"

logger = logging.getLogger(__name__)


def _paired(scores, labels) -> tuple:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.size != y.size:
        raise DimensionError(f"scores ({s.size}) and labels ({y.size}) differ in length")
    if s.size == 0:
        raise DomainError("scores and labels must be nonempty")
    return s, y


# ============================================================================
# DISCRIMINATION AND ACCURACY
# ============================================================================

def auc(scores, labels) -> float:
    """
    Mann-Whitney AUC: P(score+ > score-) + 0.5 * P(tie).

    Raises:
        DomainError: If only one class is present

    Examples:
        >>> auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        0.75
    """
    s, y = _paired(scores, labels)
    positive = y == 1.0
    n_pos = int(positive.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("AUC is undefined when labels contain a single class")
    ranks = stats.rankdata(s)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def brier(scores, labels) -> float:
    """Mean squared gap between scores and 0/1 outcomes."""
    s, y = _paired(scores, labels)
    return float(np.mean((s - y) ** 2))


def mse_vs_truth(scores, true_prob: Optional[np.ndarray]) -> float:
    """
    Mean squared gap between scores and true probabilities.

    Raises:
        DomainError: If true probabilities are not available
    """
    if true_prob is None:
        raise DomainError("MSE against the truth needs true probabilities")
    s, p = _paired(scores, true_prob)
    return float(np.mean((s - p) ** 2))


def quantile_ratio(
    scores,
    reference,
    low: float = config.QUANTILE_LOW,
    high: float = config.QUANTILE_HIGH,
) -> float:
    """
    (q90(scores) - q10(scores)) / (q90(reference) - q10(reference)).

    Quantiles interpolate linearly between order statistics.

    Raises:
        DomainError: Empty input or zero reference spread
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    ref = np.asarray(reference, dtype=np.float64).ravel()
    if s.size == 0 or ref.size == 0:
        raise DomainError("quantile_ratio needs nonempty scores and reference")
    ref_low, ref_high = np.quantile(ref, [low, high])
    spread = ref_high - ref_low
    if spread <= 0:
        raise DomainError("Reference interdecile range is zero; quantile ratio undefined")
    s_low, s_high = np.quantile(s, [low, high])
    return float((s_high - s_low) / spread)


# ============================================================================
# CALIBRATION
# ============================================================================

def calibration_curve(scores, labels, n_bins: int = config.CALIBRATION_BINS) -> CalibrationCurve:
    """
    Reliability diagram with bins cut at empirical quantiles of the scores.

    A score equal to an interior edge falls in the bin to its right; the
    last bin is closed. Tied quantiles and empty bins merge away, in which
    case the curve has fewer bins and merged=True.

    Raises:
        ParameterError: Unless n >= n_bins >= 2
    """
    s, y = _paired(scores, labels)
    if not (2 <= n_bins <= s.size):
        raise ParameterError(f"calibration_curve needs n >= bins >= 2 (n={s.size}, bins={n_bins})")

    edges = np.unique(np.quantile(s, np.linspace(0.0, 1.0, n_bins + 1)))
    if edges.size == 1:
        edges = np.array([edges[0], edges[0]])
    bins = np.searchsorted(edges[1:-1], s, side='right')
    k = edges.size - 1
    counts = np.bincount(bins, minlength=k)
    sums = np.bincount(bins, weights=y, minlength=k)

    occupied = counts > 0
    keep_edges = np.append(edges[:-1][occupied], edges[-1])
    lower, upper = edges[:-1][occupied], edges[1:][occupied]
    merged = bool(k < n_bins or not occupied.all())
    if merged:
        logger.warning(f"Calibration curve merged tied quantile bins ({int(occupied.sum())} of {n_bins} remain)")

    return CalibrationCurve(
        bin_centers=(lower + upper) / 2.0,
        mean_observed=sums[occupied] / counts[occupied],
        bin_edges=keep_edges,
        counts=counts[occupied],
        requested_bins=n_bins,
        merged=merged,
    )


def _local_linear(s: np.ndarray, y: np.ndarray, points: np.ndarray, span: float) -> np.ndarray:
    """Tricube-weighted local linear fit of y on s at each point."""
    n = s.size
    k = min(n, max(2, int(math.ceil(span * n))))
    fitted = np.empty(points.size)
    chunk = max(1, 2_000_000 // n)

    for start in range(0, points.size, chunk):
        x0 = points[start:start + chunk, np.newaxis]
        distance = np.abs(s[np.newaxis, :] - x0)
        radius = np.partition(distance, k - 1, axis=1)[:, k - 1:k]
        radius = np.maximum(radius, np.finfo(float).tiny)
        u = np.minimum(distance / radius, 1.0)
        w = (1.0 - u ** 3) ** 3

        w_sum = w.sum(axis=1, keepdims=True)
        mean_s = (w * s).sum(axis=1, keepdims=True) / w_sum
        mean_y = (w * y).sum(axis=1, keepdims=True) / w_sum
        centred = s[np.newaxis, :] - mean_s
        sxx = (w * centred ** 2).sum(axis=1, keepdims=True)
        sxy = (w * centred * (y[np.newaxis, :] - mean_y)).sum(axis=1, keepdims=True)

        # weighted mean where the neighbourhood has no score spread
        flat = sxx <= 1e-12 * w_sum
        slope = np.where(flat, 0.0, sxy / np.where(flat, 1.0, sxx))
        fitted[start:start + chunk] = (mean_y + slope * (x0 - mean_s)).ravel()
    return fitted


def ici_details(scores, labels, span: float = config.ICI_SPAN) -> IciEstimate:
    """
    Integrated calibration index with a degeneracy flag.

    ICI = mean |s_i - g(s_i)| where g is the local linear calibration
    smoother. When every score is equal the smoother collapses to the label
    mean and ICI = |mean(labels) - score|, flagged as degenerate.

    Raises:
        ParameterError: If fewer than ICI_MIN_OBSERVATIONS scores are given
        DomainError: If a score lies outside [0, 1]
    """
    s, y = _paired(scores, labels)
    if s.size < config.ICI_MIN_OBSERVATIONS:
        raise ParameterError(f"ICI needs at least {config.ICI_MIN_OBSERVATIONS} observations (got {s.size})")
    if np.any((s < 0.0) | (s > 1.0)) or not np.all(np.isfinite(s)):
        raise DomainError("ICI scores must lie in [0, 1]")

    low, high = float(s.min()), float(s.max())
    if low == high:
        value = abs(float(y.mean()) - low)
        logger.warning(f"ICI computed on constant scores ({low:.6g}); smoother collapses to the label mean")
        return IciEstimate(value=value, degenerate=True)

    if s.size < config.ICI_GRID_THRESHOLD:
        fitted = _local_linear(s, y, s, span)
    else:
        grid = np.linspace(low, high, config.ICI_GRID_SIZE)
        fitted = np.interp(s, grid, _local_linear(s, y, grid, span))
    fitted = np.clip(fitted, 0.0, 1.0)
    return IciEstimate(value=float(np.mean(np.abs(s - fitted))), degenerate=False)


def ici(scores, labels, span: float = config.ICI_SPAN) -> float:
    """Integrated calibration index (see ici_details)."""
    return ici_details(scores, labels, span).value


# ============================================================================
# METRIC TABLE
# ============================================================================

def compute_metric_table(
    scores,
    labels,
    reference_histogram: ScoreHistogram,
    reference_values,
    true_prob: Optional[np.ndarray] = None,
    pseudo_count: float = config.KL_PSEUDO_COUNT,
) -> MetricTable:
    """
    All metrics of one score vector.

    Args:
        scores: Model scores in [0, 1]
        labels: 0/1 outcomes
        reference_histogram: KL reference (true probabilities or prior)
        reference_values: Values whose interdecile range normalizes QR
        true_prob: Enables mse_vs_truth when given
    """
    s = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
    score_hist = histogram(s, reference_histogram.bin_count)
    return MetricTable(
        auc=auc(s, labels),
        brier=brier(s, labels),
        ici=ici(s, labels),
        kl=kl_divergence(score_hist, reference_histogram, pseudo_count),
        qr=quantile_ratio(s, reference_values),
        mse_vs_truth=None if true_prob is None else mse_vs_truth(s, true_prob),
    )
