"""Confidence intervals: Wilson, DeLong, Newcombe and percentile bootstrap."""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.optimize import bisect
from statsmodels.stats.proportion import proportion_confint

from stratified_eval.curves import interpolate_on_grid
from stratified_eval.datamodel.requests import CiConfig
from stratified_eval.datamodel.responses import (
    CurveBand,
    CurvePoint,
    MetricValue,
    Undefined,
)
from stratified_eval.datamodel.table import Sample
from stratified_eval.errors import (
    DataError,
    DomainError,
    MetricError,
    MetricUndefined,
    OneClassOnly,
)
from stratified_eval.resampling import resample_indices, run_indexed, substream_rng
from stratified_eval.settings import stratified_eval_settings

_log = logging.getLogger(__name__)

NEWCOMBE_MAX_N = 50
NEWCOMBE_XTOL = 1e-12
# offset from a boundary estimate where the score equation changes sign
_BOUNDARY_STEP = 1e-12


def _z(alpha: float) -> float:
    return float(stats.norm.ppf(1.0 - alpha / 2.0))


## Proportions


def wilson_ci(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"Wilson interval needs 0 <= k <= n and n >= 1, got k={k}, n={n}")
    lo, hi = proportion_confint(k, n, alpha=alpha, method="wilson")
    lo = 0.0 if k == 0 else min(max(float(lo), 0.0), 1.0)
    hi = 1.0 if k == n else min(max(float(hi), 0.0), 1.0)
    return lo, hi


## AUROC


def _split_classes(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(labels) == 1
    pos, neg = scores[positive], scores[~positive]
    if pos.size == 0 or neg.size == 0:
        raise OneClassOnly()
    return pos, neg


def delong_variance(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """AUROC and its DeLong structural-component variance.

    Midranks replace the pairwise comparisons, which keeps the cost at
    O(n log n).
    """
    pos, neg = _split_classes(scores, labels)
    m, n = pos.size, neg.size

    combined = stats.rankdata(np.concatenate([pos, neg]), method="average")
    rank_pos = stats.rankdata(pos, method="average")
    rank_neg = stats.rankdata(neg, method="average")

    auc = (combined[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    v01 = (combined[:m] - rank_pos) / n
    v10 = 1.0 - (combined[m:] - rank_neg) / m
    s01 = float(np.var(v01, ddof=1)) if m > 1 else math.nan
    s10 = float(np.var(v10, ddof=1)) if n > 1 else math.nan
    return float(auc), s01 / m + s10 / n


def delong_auroc_ci(
    scores: np.ndarray, labels: np.ndarray, alpha: float = 0.05
) -> tuple[float, float, float]:
    """Wald interval around the AUROC with DeLong variance, clipped to [0, 1]."""
    auc, variance = delong_variance(scores, labels)
    half = _z(alpha) * math.sqrt(variance)
    return max(0.0, auc - half), min(1.0, auc + half), variance


def _newcombe_v(theta: float, n_pos: int, n_neg: int) -> float:
    return (
        theta
        * (1.0 - theta)
        * (
            1.0
            + (n_pos - 1) * (1.0 - theta) / (2.0 - theta)
            + (n_neg - 1) * theta / (1.0 + theta)
        )
        / (n_pos * n_neg)
    )


def newcombe_interval(
    auc: float, n_pos: int, n_neg: int, alpha: float = 0.05
) -> tuple[float, float]:
    """Score interval: the two roots of ``|auc - theta| = z * sqrt(V(theta))``."""
    z = _z(alpha)

    def lower(theta: float) -> float:
        return (auc - theta) - z * math.sqrt(_newcombe_v(theta, n_pos, n_neg))

    def upper(theta: float) -> float:
        return (theta - auc) - z * math.sqrt(_newcombe_v(theta, n_pos, n_neg))

    if auc <= 0.0:
        lo = 0.0
    else:
        b = auc if auc < 1.0 else 1.0 - _BOUNDARY_STEP
        lo = float(bisect(lower, 0.0, b, xtol=NEWCOMBE_XTOL))
    if auc >= 1.0:
        hi = 1.0
    else:
        a = auc if auc > 0.0 else _BOUNDARY_STEP
        hi = float(bisect(upper, a, 1.0, xtol=NEWCOMBE_XTOL))
    return lo, hi


def newcombe_auroc_ci(
    scores: np.ndarray, labels: np.ndarray, alpha: float = 0.05
) -> tuple[float, float]:
    pos, neg = _split_classes(scores, labels)
    auc, _ = delong_variance(scores, labels)
    return newcombe_interval(auc, pos.size, neg.size, alpha)


def auroc_ci_dispatch(
    scores: np.ndarray, labels: np.ndarray, alpha: float = 0.05
) -> tuple[float, float, str]:
    """Newcombe for small or perfectly separated groups, DeLong otherwise.

    Groups with a single row of one class also go to Newcombe, since the
    DeLong variance needs two rows per class.
    """
    pos, neg = _split_classes(scores, labels)
    auc, variance = delong_variance(scores, labels)
    n = pos.size + neg.size
    if n <= NEWCOMBE_MAX_N or auc in (0.0, 1.0) or not math.isfinite(variance):
        lo, hi = newcombe_interval(auc, pos.size, neg.size, alpha)
        return lo, hi, "newcombe"
    half = _z(alpha) * math.sqrt(variance)
    return max(0.0, auc - half), min(1.0, auc + half), "delong"


## Bootstrap

SampleMetric = Callable[[Sample], MetricValue]


@dataclass(frozen=True, slots=True)
class BootstrapResult:
    lo: Optional[float]
    hi: Optional[float]
    n_dropped: int
    n_boot: int
    unavailable_reason: Optional[str] = None

    @property
    def available(self) -> bool:
        return self.lo is not None


def _safe_value(metric: SampleMetric, sample: Sample) -> MetricValue:
    try:
        return metric(sample)
    except (MetricError, DataError) as e:
        return Undefined(str(e))


def bootstrap_ci(
    metric: SampleMetric,
    sample: Sample,
    cfg: CiConfig,
    *,
    stratify: bool,
    stream: str = "bootstrap",
    n_jobs: int = 1,
) -> BootstrapResult:
    """Percentile bootstrap interval of ``metric`` on ``sample``.

    Resample ``i`` draws from the substream ``(seed, stream, i)``. Resamples
    where the metric is undefined are dropped; when more than
    ``cfg.max_dropped_fraction`` of them are dropped no interval is given.
    The interval is widened to contain the point estimate.
    """
    estimate = _safe_value(metric, sample)
    if isinstance(estimate, Undefined):
        raise MetricUndefined(stream, estimate.reason)

    seed = cfg.seed if cfg.seed is not None else stratified_eval_settings.seed
    labels = sample.labels

    def one(i: int) -> MetricValue:
        rng = substream_rng(seed, stream, i)
        return _safe_value(metric, sample.take(resample_indices(rng, labels, stratify)))

    values = run_indexed(one, cfg.n_boot, n_jobs)
    defined = np.array([v for v in values if not isinstance(v, Undefined)], dtype=np.float64)
    n_dropped = cfg.n_boot - defined.size

    if n_dropped > cfg.max_dropped_fraction * cfg.n_boot:
        _log.debug("%s: %d of %d resamples undefined", stream, n_dropped, cfg.n_boot)
        return BootstrapResult(
            lo=None,
            hi=None,
            n_dropped=n_dropped,
            n_boot=cfg.n_boot,
            unavailable_reason=(
                f"{n_dropped} of {cfg.n_boot} bootstrap resamples undefined"
            ),
        )

    lo, hi = np.quantile(defined, [cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0])
    return BootstrapResult(
        lo=min(float(lo), estimate),
        hi=max(float(hi), estimate),
        n_dropped=n_dropped,
        n_boot=cfg.n_boot,
    )


def bootstrap_variance(
    metric: SampleMetric,
    sample: Sample,
    n_boot: int,
    seed: int,
    *,
    stratify: bool,
    stream: str = "variance",
) -> float:
    """Variance of ``metric`` over a small number of bootstrap resamples."""

    def one(i: int) -> MetricValue:
        rng = substream_rng(seed, stream, i)
        return _safe_value(metric, sample.take(resample_indices(rng, sample.labels, stratify)))

    values = [v for v in run_indexed(one, n_boot) if not isinstance(v, Undefined)]
    if len(values) < 2:
        return math.nan
    return float(np.var(values, ddof=1))


## Curve bands

SampleCurve = Callable[[Sample], Sequence[CurvePoint]]


def curve_band(
    curve: SampleCurve,
    sample: Sample,
    grid: np.ndarray,
    *,
    n_boot: int,
    alpha: float,
    seed: int,
    stream: str,
    n_jobs: int = 1,
) -> CurveBand:
    """Pointwise percentile band of a curve on a fixed x-grid.

    Resamples are stratified by class. The band is widened to contain the
    point-estimate curve at every grid position.
    """
    estimate = interpolate_on_grid(curve(sample), grid)

    def one(i: int) -> list[Optional[float]]:
        rng = substream_rng(seed, stream, i)
        try:
            points = curve(sample.take(resample_indices(rng, sample.labels, True)))
        except (MetricError, DataError):
            return [None] * len(grid)
        return interpolate_on_grid(points, grid)

    rows = run_indexed(one, n_boot, n_jobs)
    matrix = np.array(
        [[math.nan if v is None else v for v in row] for row in rows], dtype=np.float64
    )

    lo: list[Optional[float]] = []
    hi: list[Optional[float]] = []
    for j, est in enumerate(estimate):
        column = matrix[:, j]
        column = column[np.isfinite(column)]
        if est is None or column.size == 0:
            lo.append(None)
            hi.append(None)
            continue
        q_lo, q_hi = np.quantile(column, [alpha / 2.0, 1.0 - alpha / 2.0])
        lo.append(min(float(q_lo), est))
        hi.append(max(float(q_hi), est))
    return CurveBand(x=[float(x) for x in grid], lo=lo, hi=hi)
