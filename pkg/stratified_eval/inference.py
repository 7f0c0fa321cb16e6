"""Studentized permutation tests and multiplicity correction."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from statsmodels.stats.multitest import multipletests

from stratified_eval.datamodel.responses import TestResult, TestStatus, Undefined
from stratified_eval.datamodel.subgroup import SubgroupSpec
from stratified_eval.datamodel.table import Sample
from stratified_eval.errors import DataError, DomainError, MetricError, MetricUndefined
from stratified_eval.evaluators import MetricEvaluator, build_evaluator
from stratified_eval.resampling import run_indexed, substream_rng
from stratified_eval.settings import stratified_eval_settings
from stratified_eval.uncertainty import bootstrap_variance

_log = logging.getLogger(__name__)

MAX_ATTEMPTS_PER_PERMUTATION = 10
# |T_perm| >= |T_obs| is checked up to this absolute slack
_TIE_TOL = 1e-12

Stars = Literal["ns", "*", "**"]


def _as_evaluator(metric: Union[str, MetricEvaluator]) -> MetricEvaluator:
    return build_evaluator(metric) if isinstance(metric, str) else metric


def metric_variance(
    metric: Union[str, MetricEvaluator],
    rows: Sample,
    *,
    seed: Optional[int] = None,
    n_boot: Optional[int] = None,
    stream: str = "variance",
) -> float:
    """Variance of the metric estimate on ``rows``.

    Analytic where the evaluator has one (ratio metrics, AUROC, Brier,
    averages); otherwise a small inner bootstrap.
    """
    evaluator = _as_evaluator(metric)
    value = evaluator(rows)
    if isinstance(value, Undefined):
        raise MetricUndefined(evaluator.metric_id, value.reason)

    try:
        variance = evaluator.variance(rows)
    except (MetricError, DataError):
        variance = None
    if variance is None:
        variance = bootstrap_variance(
            evaluator,
            rows,
            n_boot if n_boot is not None else stratified_eval_settings.variance_n_boot,
            seed if seed is not None else stratified_eval_settings.seed,
            stratify=evaluator.requires_both_classes,
            stream=stream,
        )
    return variance if math.isfinite(variance) else 0.0


@dataclass(frozen=True, slots=True)
class _Statistic:
    disparity: float
    t: float


def _studentized(
    evaluator: MetricEvaluator,
    group: Sample,
    other: Sample,
    *,
    seed: int,
    stream: str,
) -> Optional[_Statistic]:
    value_a = evaluator(group)
    value_b = evaluator(other)
    if isinstance(value_a, Undefined) or isinstance(value_b, Undefined):
        return None
    var_a = metric_variance(evaluator, group, seed=seed, stream=f"{stream}/a")
    var_b = metric_variance(evaluator, other, seed=seed, stream=f"{stream}/b")
    disparity = value_a - value_b
    t = disparity / math.sqrt(var_a + var_b + stratified_eval_settings.variance_floor)
    return _Statistic(disparity=disparity, t=t)


def _skipped(
    group: SubgroupSpec, metric_id: str, rows_a: Sample, rows_b: Sample, reason: str
) -> TestResult:
    _log.debug("Test of %s on %s skipped: %s", metric_id, group.key, reason)
    return TestResult(
        group=group,
        metric_id=metric_id,
        group_n=rows_a.n,
        complement_n=rows_b.n,
        status=TestStatus.SKIPPED,
        skip_reason=reason,
    )


def studentized_permutation_test(
    metric: Union[str, MetricEvaluator],
    rows_a: Sample,
    rows_b: Sample,
    n_perm: int,
    seed: int,
    *,
    group: SubgroupSpec,
    min_group_size: int = 1,
    n_jobs: int = 1,
) -> TestResult:
    """Two-sided permutation test of ``metric(A) == metric(B)``.

    The statistic is the disparity divided by its estimated standard error,
    recomputed the same way on every permutation. Permutations on which the
    metric is undefined are redrawn; when the redraws exceed ``10 * n_perm``
    in total, or one permutation uses them all up, the test is skipped.
    """
    evaluator = _as_evaluator(metric)
    metric_id = evaluator.metric_id
    stream = f"perm/{metric_id}/{group.key}"

    if rows_b.n == 0:
        return _skipped(group, metric_id, rows_a, rows_b, "empty complement")
    if rows_a.n < min_group_size or rows_b.n < min_group_size:
        return _skipped(group, metric_id, rows_a, rows_b, "group below minimum size")

    observed = _studentized(evaluator, rows_a, rows_b, seed=seed, stream=f"{stream}/obs")
    if observed is None:
        return _skipped(
            group, metric_id, rows_a, rows_b, "metric undefined on the original groups"
        )

    pooled = Sample.concat(rows_a, rows_b)
    n_a = rows_a.n
    budget = MAX_ATTEMPTS_PER_PERMUTATION * n_perm

    def one(i: int) -> tuple[Optional[float], int]:
        for attempt in range(budget):
            rng = substream_rng(seed, stream, i, attempt)
            order = rng.permutation(pooled.n)
            stat = _studentized(
                evaluator,
                pooled.take(order[:n_a]),
                pooled.take(order[n_a:]),
                seed=seed,
                stream=f"{stream}/{i}/{attempt}",
            )
            if stat is not None:
                return stat.t, attempt + 1
        return None, budget

    # batches in index order; attempt counts per permutation are deterministic
    batch = max(1, n_jobs)
    t_perm: list[float] = []
    attempts = 0
    for start in range(0, n_perm, batch):
        size = min(batch, n_perm - start)
        exhausted = False
        for t, used in run_indexed(lambda k, s=start: one(s + k), size, n_jobs):
            attempts += used
            if t is None:
                exhausted = True
            else:
                t_perm.append(t)
        # every reported permutation must contribute a statistic
        if exhausted or attempts > budget:
            return _skipped(
                group,
                metric_id,
                rows_a,
                rows_b,
                f"metric undefined on too many permutations (over {budget} draws)",
            )

    exceed = np.count_nonzero(np.abs(t_perm) >= abs(observed.t) - _TIE_TOL)
    p_raw = (1.0 + exceed) / (n_perm + 1.0)
    return TestResult(
        group=group,
        metric_id=metric_id,
        group_n=rows_a.n,
        complement_n=rows_b.n,
        disparity=observed.disparity,
        t_obs=observed.t,
        p_raw=min(1.0, p_raw),
        n_perm_used=n_perm,
        status=TestStatus.COMPLETED,
    )


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return []
    if not np.all((p > 0.0) & (p <= 1.0)):
        raise DomainError("p-values must be in (0, 1].")
    _, adjusted, _, _ = multipletests(p, method="holm")
    return [float(x) for x in adjusted]


def significance_stars(p_adj: float) -> Stars:
    if p_adj <= 0.001:
        return "**"
    if p_adj <= 0.01:
        return "*"
    return "ns"
