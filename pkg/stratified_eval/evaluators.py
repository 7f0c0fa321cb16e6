"""Metric evaluators: one object per metric id.

An evaluator turns a :class:`Sample` into a metric value and knows which
analytic variance and confidence interval exist for its metric. Evaluators
are pure, so they can be called from resampling and permutation loops.
"""

import math
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from stratified_eval import curves, metrics
from stratified_eval.datamodel.requests import BUILTIN_METRICS, MEAN_METRIC_PREFIX
from stratified_eval.datamodel.responses import ConfidenceInterval, MetricValue, Undefined
from stratified_eval.datamodel.table import Sample
from stratified_eval.errors import ConfigError, DataError, MetricError
from stratified_eval.metrics import RatioKind
from stratified_eval.uncertainty import auroc_ci_dispatch, delong_variance, wilson_ci


class MetricEvaluator(ABC):
    metric_id: str
    # resample positives and negatives separately
    requires_both_classes: bool = False

    @abstractmethod
    def compute(self, sample: Sample) -> MetricValue:
        """Raw metric value; may raise metric or data errors."""

    def __call__(self, sample: Sample) -> MetricValue:
        try:
            return self.compute(sample)
        except (MetricError, DataError) as e:
            return Undefined(str(e))

    def variance(self, sample: Sample) -> Optional[float]:
        """Analytic variance of the estimate, None when there is none."""
        return None

    def analytic_ci(self, sample: Sample, alpha: float) -> Optional[ConfidenceInterval]:
        return None

    def params(self, sample: Sample) -> dict[str, float]:
        return {}


class RatioEvaluator(MetricEvaluator):
    def __init__(self, kind: RatioKind, threshold: float):
        self.kind = RatioKind(kind)
        self.metric_id = self.kind.value
        self.threshold = threshold
        self.requires_both_classes = self.kind in (
            RatioKind.SENSITIVITY,
            RatioKind.SPECIFICITY,
            RatioKind.BALANCED_ACCURACY,
        )

    def compute(self, sample: Sample) -> MetricValue:
        counts = metrics.confusion(sample.scores, sample.labels, self.threshold)
        return metrics.ratio_metric(self.kind, counts)

    def _single_variance(self, kind: RatioKind, sample: Sample) -> Optional[float]:
        counts = metrics.confusion(sample.scores, sample.labels, self.threshold)
        k, n = metrics.ratio_parts(kind, counts)
        if n == 0:
            return None
        p = k / n
        return p * (1.0 - p) / n

    def variance(self, sample: Sample) -> Optional[float]:
        if sample.n == 0:
            return None
        if self.kind == RatioKind.BALANCED_ACCURACY:
            sens = self._single_variance(RatioKind.SENSITIVITY, sample)
            spec = self._single_variance(RatioKind.SPECIFICITY, sample)
            if sens is None or spec is None:
                return None
            return (sens + spec) / 4.0
        return self._single_variance(self.kind, sample)

    def analytic_ci(self, sample: Sample, alpha: float) -> Optional[ConfidenceInterval]:
        if self.kind == RatioKind.BALANCED_ACCURACY or sample.n == 0:
            return None
        counts = metrics.confusion(sample.scores, sample.labels, self.threshold)
        k, n = metrics.ratio_parts(self.kind, counts)
        if n == 0:
            return None
        lo, hi = wilson_ci(k, n, alpha)
        return ConfidenceInterval(lo=lo, hi=hi, method="wilson")

    def params(self, sample: Sample) -> dict[str, float]:
        return {"threshold": self.threshold}


class AurocEvaluator(MetricEvaluator):
    metric_id = "auroc"
    requires_both_classes = True

    def compute(self, sample: Sample) -> MetricValue:
        return metrics.auroc(sample.scores, sample.labels)

    def variance(self, sample: Sample) -> Optional[float]:
        _, var = delong_variance(sample.scores, sample.labels)
        return var if math.isfinite(var) else None

    def analytic_ci(self, sample: Sample, alpha: float) -> Optional[ConfidenceInterval]:
        lo, hi, method = auroc_ci_dispatch(sample.scores, sample.labels, alpha)
        return ConfidenceInterval(lo=lo, hi=hi, method=method)


class BrierEvaluator(MetricEvaluator):
    def __init__(self, balanced: bool):
        self.balanced = balanced
        self.metric_id = "balanced_brier" if balanced else "brier"
        self.requires_both_classes = balanced

    def compute(self, sample: Sample) -> MetricValue:
        return metrics.brier(sample.scores, sample.labels, balanced=self.balanced)

    def variance(self, sample: Sample) -> Optional[float]:
        squared = (sample.scores - sample.labels) ** 2
        if not self.balanced:
            if squared.size < 2:
                return None
            return float(np.var(squared, ddof=1) / squared.size)
        positive = sample.labels == 1
        pos, neg = squared[positive], squared[~positive]
        if pos.size < 2 or neg.size < 2:
            return None
        return float(
            (np.var(pos, ddof=1) / pos.size + np.var(neg, ddof=1) / neg.size) / 4.0
        )


class DrmsceEvaluator(MetricEvaluator):
    metric_id = "drmsce"

    def __init__(self, n_bins: Optional[int] = None):
        self.n_bins = n_bins

    def _bins(self, sample: Sample) -> int:
        return self.n_bins if self.n_bins is not None else metrics.default_n_bins(sample.n)

    def compute(self, sample: Sample) -> MetricValue:
        return metrics.drmsce(sample.scores, sample.labels, self._bins(sample))

    def params(self, sample: Sample) -> dict[str, float]:
        return {"n_bins": float(self._bins(sample))}


class PrgAreaEvaluator(MetricEvaluator):
    requires_both_classes = True

    def __init__(self, metric_id: str, recg_min: float):
        self.metric_id = metric_id
        self.recg_min = recg_min

    def compute(self, sample: Sample) -> MetricValue:
        return curves.prg_area(sample.scores, sample.labels, self.recg_min).value

    def params(self, sample: Sample) -> dict[str, float]:
        out = {"recg_min": self.recg_min}
        try:
            area = curves.prg_area(sample.scores, sample.labels, self.recg_min)
        except (MetricError, DataError):
            return out
        if not isinstance(area.value, Undefined):
            out["recg_lower_limit"] = area.lower_limit
        return out


class AverageEvaluator(MetricEvaluator):
    def __init__(self, column: str):
        self.column = column
        self.metric_id = f"{MEAN_METRIC_PREFIX}{column}"

    def _values(self, sample: Sample) -> np.ndarray:
        try:
            return sample.values[self.column]
        except KeyError:
            raise ConfigError(f"Value column {self.column!r} is not loaded.") from None

    def compute(self, sample: Sample) -> MetricValue:
        return metrics.average_metric(self._values(sample))

    def variance(self, sample: Sample) -> Optional[float]:
        values = self._values(sample)
        if values.size < 2:
            return None
        return float(np.var(values, ddof=1) / values.size)


def build_evaluator(
    metric_id: str,
    *,
    threshold: float = 0.5,
    recg_min: float = 0.0,
    n_bins: Optional[int] = None,
) -> MetricEvaluator:
    if metric_id.startswith(MEAN_METRIC_PREFIX):
        return AverageEvaluator(metric_id[len(MEAN_METRIC_PREFIX) :])
    if metric_id in {k.value for k in RatioKind}:
        return RatioEvaluator(RatioKind(metric_id), threshold)
    if metric_id == "auroc":
        return AurocEvaluator()
    if metric_id in ("brier", "balanced_brier"):
        return BrierEvaluator(balanced=metric_id == "balanced_brier")
    if metric_id == "drmsce":
        return DrmsceEvaluator(n_bins)
    if metric_id == "auprg":
        return PrgAreaEvaluator("auprg", 0.0)
    if metric_id == "pauprg":
        return PrgAreaEvaluator("pauprg", recg_min)
    raise ConfigError(
        f"Unknown metric id {metric_id!r}. "
        f"Allowed values: {', '.join(BUILTIN_METRICS)} or mean:<column>."
    )
