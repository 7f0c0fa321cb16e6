import importlib.metadata
import logging
from collections.abc import Callable, Sequence
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from stratified_eval import curves
from stratified_eval.dataset import file_sha256, ingest_csv, resolve_threshold
from stratified_eval.datamodel.requests import RunConfig
from stratified_eval.datamodel.responses import (
    ConfidenceInterval,
    CurveKind,
    CurvePoint,
    CurveSet,
    MetricResult,
    Provenance,
    ReportBundle,
    TestResult,
    Undefined,
)
from stratified_eval.datamodel.subgroup import SubgroupSpec
from stratified_eval.datamodel.table import EvalTable, Sample
from stratified_eval.errors import (
    DataError,
    EmptyInput,
    EvaluationError,
    MetricError,
    StratifiedEvalError,
)
from stratified_eval.evaluators import MetricEvaluator, build_evaluator
from stratified_eval.inference import holm_bonferroni, studentized_permutation_test
from stratified_eval.settings import stratified_eval_settings
from stratified_eval.subgroups import (
    complement_mask,
    enumerate_subgroups,
    rank_interestingness,
    subgroup_mask,
)
from stratified_eval.uncertainty import bootstrap_ci, curve_band

_log = logging.getLogger(__name__)

OVERALL_KEY = "(all)"
BANDED_KINDS: tuple[CurveKind, ...] = ("roc", "pr", "prg")


def get_tool_version() -> str:
    try:
        return importlib.metadata.version("stratified-eval")
    except importlib.metadata.PackageNotFoundError:
        return "0.0.0"


## Metric cells


def _interval(
    evaluator: MetricEvaluator, sample: Sample, cfg: RunConfig, stream: str
) -> tuple[Optional[ConfidenceInterval], Optional[str]]:
    override = cfg.ci.method_override
    if override != "bootstrap":
        try:
            analytic = evaluator.analytic_ci(sample, cfg.ci.alpha)
        except (MetricError, DataError) as e:
            return None, str(e)
        if analytic is not None:
            return analytic, None
        if override == "analytic":
            return None, "no analytic interval for this metric"

    stratify = cfg.ci.stratify and evaluator.requires_both_classes
    result = bootstrap_ci(
        evaluator, sample, cfg.ci, stratify=stratify, stream=stream, n_jobs=cfg.n_jobs
    )
    if not result.available:
        return None, result.unavailable_reason
    method = "stratified_bootstrap" if stratify else "bootstrap"
    return ConfidenceInterval(lo=result.lo, hi=result.hi, method=method), None  # type: ignore[arg-type]


def evaluate_cell(
    evaluator: MetricEvaluator, sample: Sample, cfg: RunConfig, stream: str
) -> MetricResult:
    """Metric value with its confidence interval on one selection of rows."""
    value = evaluator(sample)
    base = dict(
        metric_id=evaluator.metric_id,
        n=sample.n,
        n_pos=sample.n_pos,
        n_neg=sample.n_neg,
        params=evaluator.params(sample),
    )
    if isinstance(value, Undefined):
        _log.debug("%s undefined on %s: %s", evaluator.metric_id, stream, value.reason)
        return MetricResult(
            value=None,
            undefined_reason=value.reason,
            ci_unavailable_reason="metric undefined",
            **base,
        )

    ci, reason = _interval(evaluator, sample, cfg, stream)
    if ci is None:
        _log.debug("No CI for %s on %s: %s", evaluator.metric_id, stream, reason)
    return MetricResult(value=value, ci=ci, ci_unavailable_reason=reason, **base)


def _guarded(subgroup: str, fn: Callable[[], MetricResult]) -> MetricResult:
    try:
        return fn()
    except StratifiedEvalError:
        raise
    except Exception as e:
        raise EvaluationError(str(e), subgroup=subgroup) from e


## Curves

SampleCurve = Callable[[Sample], Sequence[CurvePoint]]


def _curve_builders(cfg: RunConfig) -> dict[CurveKind, SampleCurve]:
    return {
        "roc": lambda s: curves.roc_curve(s.scores, s.labels),
        "pr": lambda s: curves.pr_curve(s.scores, s.labels),
        "prg": lambda s: curves.prg_curve(s.scores, s.labels).points,
        "calibration": lambda s: curves.calibration_curve(s.scores, s.labels, cfg.n_bins),
    }


def build_curve_sets(
    table: EvalTable,
    groups: Sequence[SubgroupSpec],
    attribute: str,
    threshold: float,
    cfg: RunConfig,
) -> dict[str, CurveSet]:
    """ROC, PR, PRG and calibration curves of the level-1 groups of an attribute."""
    grid = np.linspace(0.0, 1.0, stratified_eval_settings.curve_grid_size)
    out: dict[str, CurveSet] = {}
    for kind, build in _curve_builders(cfg).items():
        polylines: dict[str, list[CurvePoint]] = {}
        bands = {}
        operating_points = {}
        plotted: list[SubgroupSpec] = []
        for spec in groups:
            sample = table.sample(subgroup_mask(table, spec))
            try:
                points = list(build(sample))
            except (MetricError, DataError) as e:
                _log.debug("No %s curve for %s: %s", kind, spec.key, e)
                continue
            if not points:
                continue
            plotted.append(spec)
            polylines[spec.key] = points
            if kind in BANDED_KINDS:
                operating_points[spec.key] = curves.operating_point(points, threshold)
                bands[spec.key] = curve_band(
                    build,
                    sample,
                    grid,
                    n_boot=stratified_eval_settings.curve_n_boot,
                    alpha=cfg.alpha,
                    seed=cfg.seed,
                    stream=f"band/{kind}/{spec.key}",
                    n_jobs=cfg.n_jobs,
                )
        out[kind] = CurveSet(
            kind=kind,
            attribute=attribute,
            groups=plotted,
            polylines=polylines,
            bands=bands,
            operating_points=operating_points,
        )
    return out


## Tests


def _adjust(tests: list[TestResult]) -> list[TestResult]:
    completed = [i for i, t in enumerate(tests) if t.completed]
    adjusted = holm_bonferroni([tests[i].p_raw for i in completed])  # type: ignore[misc]
    out = list(tests)
    for i, p_adj in zip(completed, adjusted):
        out[i] = tests[i].model_copy(update={"p_adj": max(p_adj, tests[i].p_raw)})  # type: ignore[type-var]
    return out


## Orchestration


def run_evaluation(cfg: RunConfig, table: Optional[EvalTable] = None) -> ReportBundle:
    """Evaluate every metric on every subgroup and test against complements.

    Pass ``table`` to evaluate an already loaded table; otherwise the input
    file of ``cfg`` is ingested. The result is fully determined by the input
    rows and ``cfg``.
    """
    started_at = datetime.now(timezone.utc)

    input_sha256: Optional[str] = None
    if table is None:
        table = ingest_csv(
            cfg.input.path,
            cfg.input.score_col,
            cfg.input.label_col,
            cfg.input.attr_cols,
            cfg.input.value_cols,
        )
        input_sha256 = file_sha256(cfg.input.path)
    if table.row_count == 0:
        raise EmptyInput("The input table has no rows.")

    threshold = resolve_threshold(cfg.threshold_rule, table)
    _log.info("Decision threshold %.6g (%s)", threshold, cfg.threshold_rule.kind)

    enumeration = cfg.enumeration.model_copy(
        update={"attributes_in_scope": cfg.attributes}
    )
    specs = enumerate_subgroups(table, enumeration)
    masks = {spec.key: subgroup_mask(table, spec) for spec in specs}

    evaluators = {
        m: build_evaluator(m, threshold=threshold, recg_min=cfg.recg_min, n_bins=cfg.n_bins)
        for m in cfg.metrics
    }

    everything = table.sample()
    overall = {
        m: _guarded(
            OVERALL_KEY,
            lambda ev=ev, m=m: evaluate_cell(ev, everything, cfg, f"ci/{m}/{OVERALL_KEY}"),
        )
        for m, ev in evaluators.items()
    }
    grid: dict[str, dict[str, MetricResult]] = {m: {} for m in cfg.metrics}
    for spec in specs:
        sample = table.sample(masks[spec.key])
        for m, ev in evaluators.items():
            grid[m][spec.key] = _guarded(
                spec.key,
                lambda ev=ev, m=m, sample=sample, spec=spec: evaluate_cell(
                    ev, sample, cfg, f"ci/{m}/{spec.key}"
                ),
            )
    _log.info("Computed %d metrics on %d subgroups", len(evaluators), len(specs))

    curve_sets: dict[str, dict[str, CurveSet]] = {}
    for attribute in cfg.attributes:
        level_one = [s for s in specs if s.level == 1 and s.attributes == (attribute,)]
        curve_sets[attribute] = build_curve_sets(table, level_one, attribute, threshold, cfg)
    _log.info("Built curves for %d attributes", len(curve_sets))

    tests: list[TestResult] = []
    for m in cfg.tested_metrics:
        for spec in specs:
            tests.append(
                studentized_permutation_test(
                    evaluators[m],
                    table.sample(masks[spec.key]),
                    table.sample(complement_mask(table, spec)),
                    cfg.n_perm,
                    cfg.seed,
                    group=spec,
                    min_group_size=cfg.enumeration.min_group_size,
                    n_jobs=cfg.n_jobs,
                )
            )
    tests = _adjust(tests)
    _log.info(
        "Ran %d tests, %d completed",
        len(tests),
        sum(1 for t in tests if t.completed),
    )

    ranking = {
        m: rank_interestingness([t for t in tests if t.metric_id == m])[: cfg.top_k]
        for m in cfg.tested_metrics
    }

    provenance = Provenance(
        tool_version=get_tool_version(),
        seed=cfg.seed,
        input_sha256=input_sha256,
        row_count=table.row_count,
        threshold=threshold,
        started_at=started_at,
        finished_at=datetime.now(timezone.utc),
    )
    return ReportBundle(
        config=cfg,
        provenance=provenance,
        subgroups=specs,
        overall=overall,
        grid=grid,
        tests=tests,
        curves=curve_sets,
        ranking=ranking,
    )
