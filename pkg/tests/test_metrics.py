import itertools

import numpy as np
import pytest
from pytest_check import check

from stratified_eval.datamodel.responses import ConfusionCounts, Undefined
from stratified_eval.errors import EmptyInput, NonFiniteValue, OneClassOnly, TooFewSamples
from stratified_eval.metrics import (
    RatioKind,
    auroc,
    average_metric,
    brier,
    confusion,
    default_n_bins,
    drmsce,
    equal_count_bins,
    ratio_metric,
)
from tests.synthetic import calibrated

SCORES = np.array([0.9, 0.4, 0.6, 0.1])
LABELS = np.array([1, 1, 0, 0])


def test_confusion_counts():
    check.equal(confusion(SCORES, LABELS, 0.5), ConfusionCounts(tp=1, fn=1, fp=1, tn=1))
    check.equal(confusion(SCORES, LABELS, 0.0), ConfusionCounts(tp=2, fn=0, fp=2, tn=0))
    check.equal(confusion(SCORES, LABELS, 1.0), ConfusionCounts(tp=0, fn=2, fp=0, tn=2))


def test_threshold_is_inclusive():
    counts = confusion(np.array([0.5, 0.5]), np.array([1, 0]), 0.5)
    assert counts == ConfusionCounts(tp=1, fn=0, fp=1, tn=0)


def test_confusion_of_nothing():
    with pytest.raises(EmptyInput):
        confusion(np.array([]), np.array([]), 0.5)


def test_ratio_metrics():
    c = ConfusionCounts(tp=1, fn=1, fp=1, tn=1)
    check.equal(ratio_metric(RatioKind.ACCURACY, c), 0.5)
    check.equal(ratio_metric(RatioKind.SENSITIVITY, c), 0.5)
    check.equal(ratio_metric(RatioKind.BALANCED_ACCURACY, c), 0.5)

    # sensitivity 1.0, specificity 0.5
    c = ConfusionCounts(tp=3, fn=0, fp=2, tn=2)
    check.equal(ratio_metric(RatioKind.BALANCED_ACCURACY, c), 0.75)
    check.equal(ratio_metric(RatioKind.PRECISION, c), 0.6)


def test_ratio_metric_undefined():
    nothing_predicted = ConfusionCounts(tp=0, fn=2, fp=0, tn=2)
    check.equal(
        ratio_metric(RatioKind.PRECISION, nothing_predicted),
        Undefined("no positive predictions"),
    )

    no_positives = ConfusionCounts(tp=0, fn=0, fp=2, tn=2)
    check.equal(
        ratio_metric(RatioKind.SENSITIVITY, no_positives), Undefined("no positive labels")
    )
    check.equal(
        ratio_metric(RatioKind.BALANCED_ACCURACY, no_positives),
        Undefined("no positive labels"),
    )
    check.equal(
        ratio_metric("accuracy", ConfusionCounts(tp=0, fn=0, fp=0, tn=0)),
        Undefined("no rows"),
    )


def test_auroc_examples():
    check.equal(auroc(np.array([0.9, 0.8, 0.3, 0.2]), np.array([1, 1, 0, 0])), 1.0)
    check.equal(auroc(np.array([0.9, 0.2, 0.8, 0.3]), np.array([1, 0, 0, 1])), 0.75)
    check.equal(auroc(np.array([0.4, 0.4]), np.array([1, 0])), 0.5)
    check.equal(
        auroc(np.array([0.4, 0.7]), np.array([1, 1])), Undefined("only one class present")
    )


def test_auroc_matches_pair_counting():
    rng = np.random.default_rng(11)
    scores = rng.integers(0, 20, 60) / 20.0
    labels = rng.integers(0, 2, 60)
    pos, neg = scores[labels == 1], scores[labels == 0]

    pairs = [(p > q) + 0.5 * (p == q) for p, q in itertools.product(pos, neg)]
    assert auroc(scores, labels) == pytest.approx(np.mean(pairs), abs=1e-12)


def test_auroc_invariances():
    rng = np.random.default_rng(5)
    scores = rng.random(200)
    labels = rng.integers(0, 2, 200)
    value = auroc(scores, labels)

    # strictly increasing transforms keep the ranks
    check.equal(auroc(scores**3, labels), value)
    check.almost_equal(auroc(scores, 1 - labels), 1.0 - value, abs=1e-12)


def test_brier():
    check.equal(brier(np.array([1.0, 0.0]), np.array([1, 0])), 0.0)
    check.equal(brier(np.array([0.5, 0.5]), np.array([1, 0])), 0.25)
    check.almost_equal(
        brier(np.array([0.9, 0.4, 0.6, 0.1]), np.array([1, 1, 0, 0])), 0.185
    )

    # per-class means 0.05 and 0.075
    scores = np.array([0.9, 0.7, 0.1, 0.3, 0.4, 0.2])
    labels = np.array([1, 1, 0, 0, 0, 0])
    check.almost_equal(brier(scores, labels, balanced=True), (0.05 + 0.075) / 2)

    with pytest.raises(OneClassOnly):
        brier(np.array([0.3, 0.2]), np.array([0, 0]), balanced=True)
    with pytest.raises(EmptyInput):
        brier(np.array([]), np.array([]))



@pytest.mark.parametrize("k", [2, 3, 7])
def test_balanced_brier_ignores_positive_replication(k):
    scores, labels = calibrated(np.random.default_rng(k), 80)
    positive = labels == 1
    replicated_scores = np.r_[np.repeat(scores[positive], k), scores[~positive]]
    replicated_labels = np.r_[np.repeat(labels[positive], k), labels[~positive]]

    assert brier(replicated_scores, replicated_labels, balanced=True) == pytest.approx(
        brier(scores, labels, balanced=True), abs=1e-12
    )
    # the plain score moves with the base rate
    assert brier(replicated_scores, replicated_labels) != pytest.approx(
        brier(scores, labels), abs=1e-12
    )


def test_average_metric():
    check.almost_equal(average_metric(np.array([0.5, 0.7, 0.9])), 0.7)
    check.equal(average_metric(np.array([1.0])), 1.0)
    check.almost_equal(average_metric(np.arange(1, 101) / 100.0), 0.505)

    with pytest.raises(EmptyInput):
        average_metric(np.array([]))
    with pytest.raises(NonFiniteValue):
        average_metric(np.array([0.5, np.nan]))


def test_default_bins():
    check.equal(default_n_bins(5), 1)
    check.equal(default_n_bins(100), 10)
    check.equal(default_n_bins(10_000), 15)


def test_equal_count_bins():
    scores = np.array([0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8])
    bins = equal_count_bins(scores, 3)
    sizes = [b.size for b in bins]
    check.equal(sum(sizes), 7)
    check.less_equal(max(sizes) - min(sizes), 1)
    # every score of a bin is below every score of the next one
    for low, high in zip(bins, bins[1:]):
        check.less_equal(scores[low].max(), scores[high].min())

    with pytest.raises(TooFewSamples):
        equal_count_bins(scores, 4)


def test_drmsce_examples():
    # plugin (1/6)^2 minus a correction of 1/8 is negative, clamped to zero
    check.equal(drmsce(np.full(3, 0.5), np.array([1, 0, 1]), n_bins=1), 0.0)
    check.equal(drmsce(np.array([0.0, 0.0, 1.0, 1.0]), np.array([0, 0, 1, 1]), 2), 0.0)


def test_drmsce_plugin_of_constant_offset():
    # one bin, mean score 0.8, mean label 0.5
    scores = np.full(10, 0.8)
    labels = np.array([1, 0] * 5)
    check.almost_equal(drmsce(scores, labels, n_bins=1, debias=False), 0.3)
    expected = np.sqrt(0.09 - 0.25 / 9)
    check.almost_equal(drmsce(scores, labels, n_bins=1), expected)


def test_drmsce_too_few_rows():
    with pytest.raises(TooFewSamples):
        drmsce(np.array([0.3]), np.array([1]))
    with pytest.raises(TooFewSamples):
        drmsce(np.array([0.3, 0.4, 0.5]), np.array([1, 0, 1]), n_bins=2)


@pytest.mark.slow
def test_drmsce_is_stable_across_sample_sizes():
    rng = np.random.default_rng(2023)
    means = {}
    for n in (100, 1000):
        debiased, plugin = [], []
        for _ in range(1000):
            scores, labels = calibrated(rng, n)
            debiased.append(drmsce(scores, labels))
            plugin.append(drmsce(scores, labels, debias=False))
        means[n] = (np.mean(debiased), np.mean(plugin))

    drift = abs(means[100][0] - means[1000][0])
    plugin_drift = abs(means[100][1] - means[1000][1])
    check.greater(plugin_drift, 0.02)
    check.less(drift, 0.5 * plugin_drift)
    check.less(drift, 0.035)
    # the debiased estimate is smaller than the plugin one on average
    check.less(means[100][0], means[100][1])


@pytest.mark.slow
def test_drmsce_near_zero_when_calibrated():
    rng = np.random.default_rng(7)
    values = [drmsce(*calibrated(rng, 200), n_bins=10) for _ in range(1000)]
    plugin = [
        drmsce(*calibrated(rng, 200), n_bins=10, debias=False) for _ in range(1000)
    ]
    check.less(np.mean(values), 0.04)
    check.less(np.mean(values), np.mean(plugin))
