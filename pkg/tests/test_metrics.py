"""Per-group confusion counting and the derived fairness metrics."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairvote import GroupConfusion, GroupCounts, confusion_by_group, metric_report
from fairvote.errors import LengthMismatch, NoPositivesAnywhere

from .oracles import naive_confusion


def test_perfect_classifier_single_group():
    conf = confusion_by_group([1, 0], [1, 0], ["a", "a"])
    assert conf.counts["a"] == GroupCounts(tp=1, fp=0, fn=0, tn=1)
    assert conf.accuracy == 1.0


def test_all_negative_classifier_counts_misses():
    conf = confusion_by_group([0, 0], [1, 1], ["a", "b"])
    assert conf.counts["a"] == GroupCounts(tp=0, fp=0, fn=1, tn=0)
    assert conf.counts["b"] == GroupCounts(tp=0, fp=0, fn=1, tn=0)


def test_mixed_hand_counts():
    conf = confusion_by_group([1, 1, 0, 1], [1, 0, 1, 1],
                              ["a", "a", "b", "b"])
    assert conf.counts["a"] == GroupCounts(tp=1, fp=1, fn=0, tn=0)
    assert conf.counts["b"] == GroupCounts(tp=1, fp=0, fn=1, tn=0)


def test_counts_partition_the_samples():
    rng = np.random.default_rng(0)
    preds = rng.integers(0, 2, 100)
    labels = rng.integers(0, 2, 100)
    groups = rng.choice(["a", "b", "c"], 100)
    conf = confusion_by_group(preds, labels, groups)
    assert conf.n_samples == 100
    assert sum(c.size for c in conf.counts.values()) == 100


def test_declared_group_order_and_absent_groups():
    conf = confusion_by_group([1], [1], ["b"], group_names=["a", "b"])
    assert list(conf.counts) == ["a", "b"]
    assert conf.counts["a"].size == 0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        confusion_by_group([1, 0], [1], ["a", "a"])


def test_non_binary_values_rejected():
    with pytest.raises(ValueError):
        confusion_by_group([2, 0], [1, 0], ["a", "a"])
    with pytest.raises(ValueError):
        confusion_by_group([1, 0], [1, -1], ["a", "a"])


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    preds = rng.integers(0, 2, 60)
    labels = rng.integers(0, 2, 60)
    groups = rng.choice(["a", "b"], 60)
    perm = rng.permutation(60)
    before = confusion_by_group(preds, labels, groups)
    after = confusion_by_group(preds[perm], labels[perm], groups[perm])
    assert before.counts == after.counts


def test_confusion_matches_naive_enumeration():
    rng = np.random.default_rng(17)
    preds = rng.integers(0, 2, 200)
    labels = rng.integers(0, 2, 200)
    groups = rng.choice(["a", "b", "c"], 200)
    conf = confusion_by_group(preds, labels, groups)
    naive = naive_confusion(preds, labels, groups)
    for name, c in conf.counts.items():
        assert (c.tp, c.fp, c.fn, c.tn) == naive[name]


# -- metric report -----------------------------------------------------------------

def test_report_hand_arithmetic():
    conf = GroupConfusion(counts={
        "a": GroupCounts(tp=3, fp=0, fn=1, tn=0),
        "b": GroupCounts(tp=1, fp=0, fn=1, tn=0),
    })
    report = metric_report(conf)
    assert report.recalls == {"a": 0.75, "b": 0.5}
    assert report.min_recall == 0.5
    assert report.eo_gap == 0.25
    assert report.accuracy == 4 / 6


def test_single_group_report():
    conf = GroupConfusion(counts={"a": GroupCounts(tp=5, fp=0, fn=0, tn=0)})
    report = metric_report(conf)
    assert report.min_recall == 1.0
    assert report.eo_gap == 0.0
    assert report.undefined_groups == ()


def test_group_without_positives_is_flagged_not_scored():
    conf = GroupConfusion(counts={
        "a": GroupCounts(tp=2, fp=0, fn=2, tn=0),
        "b": GroupCounts(tp=0, fp=1, fn=0, tn=3),
    })
    report = metric_report(conf)
    assert report.recalls["b"] is None
    assert report.undefined_groups == ("b",)
    assert report.min_recall == 0.5
    assert report.eo_gap == 0.0  # only one group has defined recall


def test_no_positives_anywhere():
    conf = GroupConfusion(counts={"a": GroupCounts(tp=0, fp=1, fn=0, tn=1)})
    with pytest.raises(NoPositivesAnywhere):
        metric_report(conf)


def test_accuracy_decomposes_over_groups():
    rng = np.random.default_rng(5)
    preds = rng.integers(0, 2, 90)
    labels = rng.integers(0, 2, 90)
    groups = rng.choice(["a", "b", "c"], 90)
    conf = confusion_by_group(preds, labels, groups)
    weighted = sum(
        (c.tp + c.tn) / c.size * (c.size / conf.n_samples)
        for c in conf.counts.values() if c.size
    )
    assert conf.accuracy == pytest.approx(weighted, abs=1e-12)


def test_report_serialization_round_trip_text():
    conf = confusion_by_group([1, 0, 1], [1, 0, 0], ["a", "a", "b"])
    report = metric_report(conf)
    text = report.to_text()
    assert "accuracy=" in text and "min_recall=" in text
    assert "recall[b]=undefined" in text
    d = report.to_dict()
    assert d["recalls"]["a"] == 1.0 and d["recalls"]["b"] is None


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 120), st.integers(0, 2 ** 32 - 1))
def test_counts_always_partition(n, seed):
    rng = np.random.default_rng(seed)
    preds = rng.integers(0, 2, n)
    labels = rng.integers(0, 2, n)
    groups = rng.choice(["a", "b"], n)
    conf = confusion_by_group(preds, labels, groups)
    assert sum(c.size for c in conf.counts.values()) == n
    for name, c in conf.counts.items():
        mask = groups == name
        assert c.positives == int(labels[mask].sum())
