"""ROC, PR, precision-recall-gain and calibration curves.

Curves are built from the cumulative contingency counts at every distinct
score, visited from the highest score down, with the usual convention that
a row is predicted positive iff ``score >= threshold``.

Precision and recall gains are affine in ``1/TP``, so a straight segment
between two contingency tables (linear in TP and FP) is a straight segment
in gain space. All interpolation between thresholds is done on counts.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from stratified_eval.datamodel.responses import CurvePoint, MetricValue, Undefined
from stratified_eval.errors import (
    DegenerateBaseRate,
    DomainError,
    OneClassOnly,
    TooFewSamples,
)
from stratified_eval.metrics import default_n_bins, equal_count_bins

# relative tolerance when a target count coincides with an observed count
_COUNT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class _Counts:
    thresholds: np.ndarray  # distinct scores, descending
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int


def _cumulative_counts(scores: np.ndarray, labels: np.ndarray) -> _Counts:
    scores = np.asarray(scores, dtype=np.float64)
    positive = (np.asarray(labels) == 1).astype(np.int64)
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly()

    order = np.argsort(-scores, kind="stable")
    ordered = scores[order]
    tps = np.cumsum(positive[order])
    fps = np.cumsum(1 - positive[order])
    last = np.r_[np.flatnonzero(np.diff(ordered)), ordered.size - 1]
    return _Counts(
        thresholds=ordered[last],
        tp=tps[last].astype(np.float64),
        fp=fps[last].astype(np.float64),
        n_pos=n_pos,
        n_neg=n_neg,
    )


def curve_area(points: Sequence[CurvePoint]) -> float:
    xs = [p.x for p in points]
    ys = [p.y if p.y is not None else math.nan for p in points]
    return float(trapezoid(ys, xs))


## ROC / PR


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> list[CurvePoint]:
    """(FPR, TPR) at every distinct threshold.

    The curve starts at (0, 0) with threshold +inf and ends at (1, 1) at the
    lowest score.
    """
    c = _cumulative_counts(scores, labels)
    points = [CurvePoint(x=0.0, y=0.0, threshold=math.inf)]
    points.extend(
        CurvePoint(x=fp / c.n_neg, y=tp / c.n_pos, threshold=t)
        for t, tp, fp in zip(c.thresholds.tolist(), c.tp.tolist(), c.fp.tolist())
    )
    return points


def pr_curve(scores: np.ndarray, labels: np.ndarray) -> list[CurvePoint]:
    """(recall, precision) at every distinct threshold."""
    c = _cumulative_counts(scores, labels)
    return [
        CurvePoint(x=tp / c.n_pos, y=tp / (tp + fp), threshold=t)
        for t, tp, fp in zip(c.thresholds.tolist(), c.tp.tolist(), c.fp.tolist())
    ]


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step-wise area under the PR curve, sum of (delta recall) * precision."""
    points = pr_curve(scores, labels)
    recalls = np.array([0.0] + [p.x for p in points])
    precisions = np.array([p.y for p in points], dtype=np.float64)
    return float(np.sum(np.diff(recalls) * precisions))


## Precision-recall gain


def pr_gain(prec: float, rec: float, br: float) -> tuple[float, float]:
    if not 0.0 < br < 1.0:
        raise DegenerateBaseRate(f"base rate {br} is not in (0, 1)")
    if prec <= 0.0 or rec <= 0.0:
        raise DomainError("precision and recall gains need prec > 0 and rec > 0")
    prec_gain = (prec - br) / ((1.0 - br) * prec)
    rec_gain = (rec - br) / ((1.0 - br) * rec)
    return prec_gain, rec_gain


def _gains(
    tp: np.ndarray, fp: np.ndarray, n_pos: int, n_neg: int
) -> tuple[np.ndarray, np.ndarray]:
    ratio = n_pos / n_neg
    with np.errstate(divide="ignore", invalid="ignore"):
        rec_gain = 1.0 - ratio * (n_pos - tp) / tp
        prec_gain = 1.0 - ratio * fp / tp
    return rec_gain, prec_gain


def _target_tp(rec_gain: float, n_pos: int, n_neg: int) -> float:
    """True-positive count whose recall gain is ``rec_gain``."""
    target = n_pos * n_pos / (n_pos + n_neg * (1.0 - rec_gain))
    nearest = round(target)
    if abs(target - nearest) <= _COUNT_TOL * max(1.0, target):
        return float(nearest)
    return target


def _fp_at(tp: np.ndarray, fp: np.ndarray, target: float) -> tuple[int, Optional[float]]:
    """Locate ``target`` true positives on the polyline through (tp, fp).

    Returns the index of the first vertex with ``tp >= target`` and, when the
    target lies strictly inside the segment ending there, the interpolated
    false-positive count. Only segments between two observed thresholds are
    used; nothing is extrapolated.
    """
    j = int(np.searchsorted(tp, target, side="left"))
    if j < tp.size and tp[j] == target:
        return j, None
    if j == 0 or j >= tp.size:
        return j, math.nan
    lam = (target - tp[j - 1]) / (tp[j] - tp[j - 1])
    return j, float(fp[j - 1] + lam * (fp[j] - fp[j - 1]))


@dataclass(frozen=True, slots=True)
class PrgCurve:
    points: list[CurvePoint]
    # smallest recall among thresholds with at least one true positive
    min_recall: float
    min_recall_gain: float
    # the top-scored rows are all negative, giving a rec = 0, prec = 0 point
    anchored: bool


def prg_curve(scores: np.ndarray, labels: np.ndarray) -> PrgCurve:
    """Precision-recall-gain points at every threshold with a true positive.

    When two observed thresholds straddle ``rec = br`` the recall-gain-zero
    point is interpolated between them and inserted into the curve.
    """
    c = _cumulative_counts(scores, labels)
    rec_gain, prec_gain = _gains(c.tp, c.fp, c.n_pos, c.n_neg)

    defined = c.tp > 0
    first = int(np.argmax(defined))
    anchored = first > 0

    points = [
        CurvePoint(x=float(x), y=float(y), threshold=float(t))
        for x, y, t in zip(rec_gain[defined], prec_gain[defined], c.thresholds[defined])
    ]

    target = _target_tp(0.0, c.n_pos, c.n_neg)
    j, fp_star = _fp_at(c.tp, c.fp, target)
    if fp_star is not None and not math.isnan(fp_star):
        crossing = CurvePoint(
            x=0.0,
            y=float(1.0 - (c.n_pos / c.n_neg) * fp_star / target),
            threshold=float(c.thresholds[j]),
        )
        at = int(np.searchsorted([p.x for p in points], 0.0, side="left"))
        points.insert(at, crossing)

    return PrgCurve(
        points=points,
        min_recall=float(c.tp[first] / c.n_pos),
        min_recall_gain=float(rec_gain[first]),
        anchored=anchored,
    )


@dataclass(frozen=True, slots=True)
class PrgArea:
    value: MetricValue
    # lower recall-gain limit the integral actually started from
    lower_limit: float


def prg_area(scores: np.ndarray, labels: np.ndarray, recg_min: float = 0.0) -> PrgArea:
    """Area under the upper PRG envelope over ``[recg_min, 1]``.

    Thresholds sharing a recall keep the largest precision gain. When
    ``recg_min`` is attainable the raw integral is returned. Otherwise a full
    AUPRG (``recg_min == 0``) is undefined, and a partial area is the mean
    precision gain over the attainable range times the nominal width
    ``1 - recg_min``.
    """
    if not 0.0 <= recg_min < 1.0:
        raise DomainError("recg_min must be in [0, 1)")
    c = _cumulative_counts(scores, labels)

    keep = np.r_[True, np.diff(c.tp) > 0]
    tp, fp = c.tp[keep], c.fp[keep]
    rec_gain, prec_gain = _gains(tp, fp, c.n_pos, c.n_neg)
    first = int(np.argmax(tp > 0))

    target = _target_tp(recg_min, c.n_pos, c.n_neg)
    j, fp_star = _fp_at(tp, fp, target)

    if fp_star is None:
        xs = np.r_[recg_min, rec_gain[j + 1 :]]
        ys = prec_gain[j:]
        return PrgArea(value=float(trapezoid(ys, xs)), lower_limit=recg_min)
    if not math.isnan(fp_star):
        y_star = 1.0 - (c.n_pos / c.n_neg) * fp_star / target
        xs = np.r_[recg_min, rec_gain[j:]]
        ys = np.r_[y_star, prec_gain[j:]]
        return PrgArea(value=float(trapezoid(ys, xs)), lower_limit=recg_min)

    if recg_min == 0.0:
        return PrgArea(value=Undefined("recG_min unattainable"), lower_limit=recg_min)

    start = float(rec_gain[first])
    if start >= 1.0:
        return PrgArea(
            value=float(prec_gain[first] * (1.0 - recg_min)), lower_limit=1.0
        )
    area = float(trapezoid(prec_gain[first:], rec_gain[first:]))
    return PrgArea(value=area * (1.0 - recg_min) / (1.0 - start), lower_limit=start)


def pauprg(scores: np.ndarray, labels: np.ndarray, recg_min: float) -> MetricValue:
    return prg_area(scores, labels, recg_min).value


def auprg(scores: np.ndarray, labels: np.ndarray) -> MetricValue:
    return prg_area(scores, labels, 0.0).value


## Calibration


def calibration_curve(
    scores: np.ndarray, labels: np.ndarray, n_bins: Optional[int] = None
) -> list[CurvePoint]:
    """(mean score, mean label) per equal-count bin, lowest scores first."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.size < 2:
        raise TooFewSamples("calibration curve needs at least 2 rows")
    if n_bins is None:
        n_bins = default_n_bins(scores.size)
    return [
        CurvePoint(
            x=float(scores[idx].mean()),
            y=float(labels[idx].mean()),
            threshold=float(scores[idx].min()),
        )
        for idx in equal_count_bins(scores, n_bins)
    ]


## Operating points


def operating_point(curve: Sequence[CurvePoint], threshold: float) -> CurvePoint:
    """Point of ``curve`` selecting the same rows as ``score >= threshold``.

    That is the point with the smallest curve threshold not below
    ``threshold``. Without such a point the highest-threshold point is used.
    """
    if not curve:
        raise ValueError("operating_point needs a nonempty curve.")
    above = [p for p in curve if p.threshold >= threshold]
    if above:
        cut = min(p.threshold for p in above)
        chosen = max((p for p in above if p.threshold == cut), key=lambda p: p.x)
    else:
        chosen = max(curve, key=lambda p: p.threshold)
    return chosen.model_copy(update={"threshold": threshold})


def interpolate_on_grid(
    curve: Sequence[CurvePoint], grid: np.ndarray
) -> list[Optional[float]]:
    """Upper envelope of ``curve`` linearly interpolated on ``grid``.

    Grid positions outside the x-range of the curve are None.
    """
    xs = np.array([p.x for p in curve], dtype=np.float64)
    ys = np.array(
        [p.y if p.y is not None else math.nan for p in curve], dtype=np.float64
    )
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    if xs.size == 0:
        return [None] * len(grid)

    unique_x = np.unique(xs)
    best_y = np.array([ys[xs == x].max() for x in unique_x])
    values = np.interp(grid, unique_x, best_y)
    inside = (grid >= unique_x[0]) & (grid <= unique_x[-1])
    return [float(v) if ok_ else None for v, ok_ in zip(values, inside)]
