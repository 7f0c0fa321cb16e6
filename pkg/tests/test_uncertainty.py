import math

import numpy as np
import pytest
from pytest_check import check
from scipy import stats

from stratified_eval.curves import roc_curve
from stratified_eval.datamodel.requests import CiConfig
from stratified_eval.datamodel.table import Sample
from stratified_eval.errors import DomainError, MetricUndefined, OneClassOnly
from stratified_eval.evaluators import build_evaluator
from stratified_eval.metrics import auroc
from stratified_eval.resampling import resample_indices, run_indexed, substream_rng
from stratified_eval.uncertainty import (
    auroc_ci_dispatch,
    bootstrap_ci,
    curve_band,
    delong_auroc_ci,
    delong_variance,
    newcombe_auroc_ci,
    newcombe_interval,
    wilson_ci,
)
from tests.synthetic import binormal

## Resampling


def test_substreams_are_reproducible():
    a = substream_rng(7, "ci/auroc/sex=F", 3).random(5)
    b = substream_rng(7, "ci/auroc/sex=F", 3).random(5)
    c = substream_rng(7, "ci/auroc/sex=F", 4).random(5)
    d = substream_rng(8, "ci/auroc/sex=F", 3).random(5)
    np.testing.assert_array_equal(a, b)
    check.is_false(np.array_equal(a, c))
    check.is_false(np.array_equal(a, d))


def test_run_indexed_keeps_order():
    check.equal(run_indexed(lambda i: i * i, 6), [0, 1, 4, 9, 16, 25])
    check.equal(run_indexed(lambda i: i * i, 6, n_jobs=3), [0, 1, 4, 9, 16, 25])


def test_stratified_resample_keeps_class_counts():
    labels = np.array([1, 0, 0, 1, 0, 0, 0])
    idx = resample_indices(np.random.default_rng(0), labels, stratify=True)
    check.equal(idx.size, labels.size)
    check.equal(int(labels[idx].sum()), 2)


## Wilson


def test_wilson_interval():
    lo, hi = wilson_ci(5, 10, 0.05)
    check.almost_equal(lo, 0.2366, abs=1e-4)
    check.almost_equal(hi, 0.7634, abs=1e-4)


def test_wilson_boundaries():
    lo, hi = wilson_ci(0, 10)
    check.equal(lo, 0.0)
    check.greater(hi, 0.0)

    lo, hi = wilson_ci(10, 10)
    check.equal(hi, 1.0)
    check.less(lo, 1.0)

    with pytest.raises(DomainError):
        wilson_ci(3, 0)


## AUROC intervals


def test_delong_antisymmetry():
    scores, labels = binormal(np.random.default_rng(4), 40, 60)
    auc, var = delong_variance(scores, labels)
    flipped_auc, flipped_var = delong_variance(scores, 1 - labels)
    check.almost_equal(auc, auroc(scores, labels), abs=1e-12)
    check.almost_equal(flipped_auc, 1.0 - auc, abs=1e-12)
    check.almost_equal(flipped_var, var, rel=1e-9)


def test_delong_variance_halves_on_duplicated_rows():
    scores, labels = binormal(np.random.default_rng(9), 120, 150)
    _, var = delong_variance(scores, labels)
    _, doubled = delong_variance(np.tile(scores, 2), np.tile(labels, 2))
    check.between(var / doubled, 1.9, 2.1)


def test_delong_interval_contains_estimate():
    scores, labels = binormal(np.random.default_rng(2), 80, 80)
    lo, hi, var = delong_auroc_ci(scores, labels)
    value = auroc(scores, labels)
    check.less(lo, value)
    check.greater(hi, value)
    check.almost_equal(hi - lo, 2 * stats.norm.ppf(0.975) * math.sqrt(var))


def test_newcombe_at_perfect_separation():
    scores = np.array([0.9, 0.8, 0.3, 0.2])
    labels = np.array([1, 1, 0, 0])
    lo, hi = newcombe_auroc_ci(scores, labels)
    check.equal(hi, 1.0)
    check.less(lo, 1.0)
    check.greater(lo, 0.0)

    # DeLong collapses to a zero-width interval here
    d_lo, d_hi, _ = delong_auroc_ci(scores, labels)
    check.equal(d_hi - d_lo, 0.0)


def test_newcombe_tie_is_symmetric():
    lo, hi = newcombe_auroc_ci(np.array([0.5, 0.5]), np.array([1, 0]))
    check.less(lo, 0.5)
    check.greater(hi, 0.5)
    check.almost_equal(lo + hi, 1.0, abs=1e-9)


def test_newcombe_matches_grid_search():
    auc, n_pos, n_neg = 0.8, 20, 20
    z = stats.norm.ppf(0.975)
    theta = np.linspace(0.0, 1.0, 1_000_001)
    v = (
        theta
        * (1 - theta)
        * (1 + (n_pos - 1) * (1 - theta) / (2 - theta) + (n_neg - 1) * theta / (1 + theta))
        / (n_pos * n_neg)
    )
    below = theta < auc
    lower_gap = np.abs(auc - theta - z * np.sqrt(v))
    upper_gap = np.abs(theta - auc - z * np.sqrt(v))
    expected_lo = theta[below][np.argmin(lower_gap[below])]
    expected_hi = theta[~below][np.argmin(upper_gap[~below])]

    lo, hi = newcombe_interval(auc, n_pos, n_neg)
    check.almost_equal(lo, expected_lo, abs=1e-5)
    check.almost_equal(hi, expected_hi, abs=1e-5)


def test_dispatch_rule():
    rng = np.random.default_rng(12)

    scores, labels = binormal(rng, 25, 25, auroc=0.9)
    check.equal(auroc_ci_dispatch(scores, labels)[2], "newcombe")

    scores, labels = binormal(rng, 26, 25, auroc=0.9)
    assert 0.0 < auroc(scores, labels) < 1.0
    check.equal(auroc_ci_dispatch(scores, labels)[2], "delong")

    separated = np.r_[rng.uniform(0.6, 1.0, 250), rng.uniform(0.0, 0.4, 250)]
    separated_labels = np.r_[np.ones(250, dtype=int), np.zeros(250, dtype=int)]
    lo, hi, method = auroc_ci_dispatch(separated, separated_labels)
    check.equal(method, "newcombe")
    check.equal(hi, 1.0)
    check.less(lo, 1.0)

    # a single positive row has no DeLong variance
    single = np.r_[0.7, rng.random(80)]
    single_labels = np.r_[1, np.zeros(80, dtype=int)]
    check.equal(auroc_ci_dispatch(single, single_labels)[2], "newcombe")


def test_one_class_has_no_auroc_interval():
    with pytest.raises(OneClassOnly):
        auroc_ci_dispatch(np.array([0.2, 0.4]), np.array([1, 1]))


## Bootstrap


def test_bootstrap_of_constant_metric():
    sample = Sample(scores=np.full(30, 0.9), labels=np.ones(30, dtype=np.int8))
    result = bootstrap_ci(
        build_evaluator("accuracy", threshold=0.5),
        sample,
        CiConfig(n_boot=200, seed=0),
        stratify=False,
    )
    check.equal((result.lo, result.hi), (1.0, 1.0))
    check.equal(result.n_dropped, 0)


def test_stratified_bootstrap_never_drops_resamples():
    scores, labels = binormal(np.random.default_rng(6), 5, 45)
    sample = Sample(scores=scores, labels=labels)
    cfg = CiConfig(n_boot=300, seed=1)
    evaluator = build_evaluator("auroc")

    stratified = bootstrap_ci(evaluator, sample, cfg, stratify=True)
    check.is_true(stratified.available)
    check.equal(stratified.n_dropped, 0)
    check.less_equal(stratified.lo, auroc(scores, labels))
    check.greater_equal(stratified.hi, auroc(scores, labels))


def test_bootstrap_without_interval_when_too_many_resamples_fail():
    scores = np.r_[0.9, np.linspace(0.0, 0.8, 29)]
    labels = np.r_[1, np.zeros(29, dtype=np.int8)]
    sample = Sample(scores=scores, labels=labels)

    result = bootstrap_ci(
        build_evaluator("auroc"), sample, CiConfig(n_boot=200, seed=3), stratify=False
    )
    check.is_false(result.available)
    check.greater(result.n_dropped, 20)
    check.is_in("bootstrap resamples undefined", result.unavailable_reason)


def test_bootstrap_of_undefined_estimate():
    sample = Sample(scores=np.array([0.2, 0.6]), labels=np.array([0, 0]))
    with pytest.raises(MetricUndefined):
        bootstrap_ci(build_evaluator("auroc"), sample, CiConfig(n_boot=100), stratify=True)


def test_bootstrap_is_independent_of_job_count():
    scores, labels = binormal(np.random.default_rng(10), 30, 70)
    sample = Sample(scores=scores, labels=labels)
    cfg = CiConfig(n_boot=250, seed=99)
    evaluator = build_evaluator("auroc")

    serial = bootstrap_ci(evaluator, sample, cfg, stratify=True, stream="s")
    parallel = bootstrap_ci(evaluator, sample, cfg, stratify=True, stream="s", n_jobs=4)
    assert (serial.lo, serial.hi) == (parallel.lo, parallel.hi)

    other_stream = bootstrap_ci(evaluator, sample, cfg, stratify=True, stream="t")
    assert (serial.lo, serial.hi) != (other_stream.lo, other_stream.hi)


def test_curve_band_contains_estimate():
    scores, labels = binormal(np.random.default_rng(3), 40, 60)
    sample = Sample(scores=scores, labels=labels)
    grid = np.linspace(0.0, 1.0, 11)
    band = curve_band(
        lambda s: roc_curve(s.scores, s.labels),
        sample,
        grid,
        n_boot=100,
        alpha=0.05,
        seed=0,
        stream="band/roc/test",
    )
    check.equal(len(band.lo), 11)
    check.equal(band.x, [float(x) for x in grid])
    for lo, hi in zip(band.lo, band.hi):
        check.less_equal(lo, hi)
    # every resampled ROC curve ends at (1, 1)
    check.equal((band.lo[-1], band.hi[-1]), (1.0, 1.0))


## Coverage


def _covered(intervals, truth) -> float:
    return float(np.mean([lo <= truth <= hi for lo, hi in intervals]))


@pytest.mark.slow
def test_wilson_coverage():
    n, p = 40, 0.3
    coverage = 0.0
    for k in range(n + 1):
        lo, hi = wilson_ci(k, n)
        if lo <= p <= hi:
            coverage += stats.binom.pmf(k, n, p)
    check.between(coverage, 0.93, 0.97)


@pytest.mark.slow
def test_delong_coverage():
    rng = np.random.default_rng(100)
    intervals = []
    for _ in range(2000):
        scores, labels = binormal(rng, 200, 200, auroc=0.8)
        lo, hi, _ = delong_auroc_ci(scores, labels)
        intervals.append((lo, hi))
    check.between(_covered(intervals, 0.8), 0.92, 0.98)


@pytest.mark.slow
def test_newcombe_coverage():
    rng = np.random.default_rng(101)
    intervals = [newcombe_auroc_ci(*binormal(rng, 15, 15, auroc=0.8)) for _ in range(2000)]
    check.between(_covered(intervals, 0.8), 0.92, 0.98)


@pytest.mark.slow
def test_stratified_bootstrap_coverage():
    rng = np.random.default_rng(102)
    evaluator = build_evaluator("auroc")
    intervals = []
    for rep in range(1000):
        scores, labels = binormal(rng, 12, 48, auroc=0.8)
        result = bootstrap_ci(
            evaluator,
            Sample(scores=scores, labels=labels),
            CiConfig(n_boot=200, seed=rep),
            stratify=True,
        )
        intervals.append((result.lo, result.hi))
    check.between(_covered(intervals, 0.8), 0.85, 0.98)
