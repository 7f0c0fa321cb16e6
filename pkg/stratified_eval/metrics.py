"""Scalar performance metrics.

All functions are pure. Metrics that can be undefined on a selection of rows
(zero denominators, a missing class) return :class:`Undefined` with a reason
instead of raising, so that a single empty cell never aborts an evaluation.
Contract violations (empty input, non-finite values, too few rows per bin)
raise the errors from :mod:`stratified_eval.errors`.
"""

import enum
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from stratified_eval.datamodel.responses import (
    ConfusionCounts,
    MetricValue,
    Undefined,
)
from stratified_eval.errors import EmptyInput, NonFiniteValue, OneClassOnly, TooFewSamples

MAX_DEFAULT_BINS = 15
ROWS_PER_DEFAULT_BIN = 10


class RatioKind(str, enum.Enum):
    ACCURACY = "accuracy"
    SENSITIVITY = "sensitivity"
    SPECIFICITY = "specificity"
    PRECISION = "precision"
    BALANCED_ACCURACY = "balanced_accuracy"


def confusion(scores: np.ndarray, labels: np.ndarray, threshold: float) -> ConfusionCounts:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.size == 0:
        raise EmptyInput("Cannot count predictions on an empty selection.")

    predicted = scores >= threshold
    positive = labels == 1
    return ConfusionCounts(
        tp=int(np.count_nonzero(predicted & positive)),
        fp=int(np.count_nonzero(predicted & ~positive)),
        tn=int(np.count_nonzero(~predicted & ~positive)),
        fn=int(np.count_nonzero(~predicted & positive)),
    )


def _ratio(numerator: int, denominator: int, reason: str) -> MetricValue:
    if denominator == 0:
        return Undefined(reason)
    return numerator / denominator


def ratio_parts(kind: RatioKind, c: ConfusionCounts) -> tuple[int, int]:
    """Numerator and denominator of a single-ratio metric."""
    if kind == RatioKind.ACCURACY:
        return c.tp + c.tn, c.n
    if kind == RatioKind.SENSITIVITY:
        return c.tp, c.tp + c.fn
    if kind == RatioKind.SPECIFICITY:
        return c.tn, c.tn + c.fp
    if kind == RatioKind.PRECISION:
        return c.tp, c.tp + c.fp
    raise ValueError(f"{kind.value} is not a single ratio.")


_UNDEFINED_REASONS = {
    RatioKind.ACCURACY: "no rows",
    RatioKind.SENSITIVITY: "no positive labels",
    RatioKind.SPECIFICITY: "no negative labels",
    RatioKind.PRECISION: "no positive predictions",
}


def ratio_metric(kind: RatioKind, c: ConfusionCounts) -> MetricValue:
    kind = RatioKind(kind)
    if kind == RatioKind.BALANCED_ACCURACY:
        sens = ratio_metric(RatioKind.SENSITIVITY, c)
        spec = ratio_metric(RatioKind.SPECIFICITY, c)
        if isinstance(sens, Undefined):
            return sens
        if isinstance(spec, Undefined):
            return spec
        return (sens + spec) / 2.0

    numerator, denominator = ratio_parts(kind, c)
    return _ratio(numerator, denominator, _UNDEFINED_REASONS[kind])


def auroc(scores: np.ndarray, labels: np.ndarray) -> MetricValue:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(labels) == 1
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return Undefined("only one class present")

    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def brier(scores: np.ndarray, labels: np.ndarray, balanced: bool = False) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.size == 0:
        raise EmptyInput("Brier score needs at least one row.")

    squared = (scores - labels) ** 2
    if not balanced:
        return float(squared.mean())

    positive = labels == 1
    if positive.all() or not positive.any():
        raise OneClassOnly("balanced Brier score needs both classes")
    return float((squared[positive].mean() + squared[~positive].mean()) / 2.0)


def average_metric(per_row_values: np.ndarray) -> float:
    values = np.asarray(per_row_values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("Cannot average an empty selection.")
    if not np.isfinite(values).all():
        raise NonFiniteValue("Per-row values must be finite.")
    return float(values.mean())


## Calibration


def default_n_bins(n: int) -> int:
    return max(1, min(MAX_DEFAULT_BINS, n // ROWS_PER_DEFAULT_BIN))


def equal_count_bins(scores: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Row indices of ``n_bins`` equal-count bins, ordered by score.

    Bin sizes differ by at most one. Every bin must hold at least two rows.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1.")
    if scores.size < 2 * n_bins:
        raise TooFewSamples(
            f"{scores.size} rows cannot fill {n_bins} bins with at least 2 rows each"
        )
    order = np.argsort(scores, kind="stable")
    return np.array_split(order, n_bins)


def drmsce(
    scores: np.ndarray,
    labels: np.ndarray,
    n_bins: Optional[int] = None,
    debias: bool = True,
) -> float:
    """Debiased root mean squared calibration error over equal-count bins.

    Each bin contributes ``(c - a)^2 - a(1 - a)/(n_b - 1)`` weighted by its
    share of rows, where ``c`` is the mean score and ``a`` the mean label.
    The weighted sum is clamped at zero before the square root. With
    ``debias=False`` the plugin estimate (no correction term) is returned.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n = scores.size
    if n < 2:
        raise TooFewSamples("calibration error needs at least 2 rows")
    if n_bins is None:
        n_bins = default_n_bins(n)

    total = 0.0
    for idx in equal_count_bins(scores, n_bins):
        n_b = idx.size
        c = scores[idx].mean()
        a = labels[idx].mean()
        term = (c - a) ** 2
        if debias:
            term -= a * (1.0 - a) / (n_b - 1)
        total += (n_b / n) * term
    return float(np.sqrt(max(0.0, total)))
