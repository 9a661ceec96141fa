"""Metrics against a brute-force per-sample counting oracle."""

import numpy as np
import pytest

from twinadapt.metrics import (
    AggregateReport,
    ConfusionMatrix,
    MetricsReport,
    accuracy,
    aggregate,
    confusion,
    f1_score,
    format_mean_std,
    precision_recall_f1,
)


def oracle_metrics(true, pred, n_classes):
    """Independent loop-based computation of all reported metrics."""
    correct = sum(1 for t, p in zip(true, pred) if t == p)
    acc = correct / len(true)
    per_class = []
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(true, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append((precision, recall, f1))
    return acc, per_class


class TestConfusion:
    def test_counts_by_hand(self):
        cm = confusion([0, 0, 1, 2], [0, 1, 1, 0], 3)
        assert cm.counts.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 0]]
        assert cm.total == 4

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            confusion([0, 1], [0], 2)

    def test_out_of_range_labels(self):
        with pytest.raises(IndexError):
            confusion([0, 3], [0, 1], 3)

    def test_empty_matrix_accuracy_undefined(self):
        with pytest.raises(ValueError, match="undefined"):
            accuracy(ConfusionMatrix(np.zeros((3, 3), dtype=np.int64)))


class TestPerClass:
    def test_never_predicted_never_true_gives_zeros(self):
        cm = confusion([0, 0, 1], [0, 1, 1], 3)
        assert precision_recall_f1(cm, 2) == (0.0, 0.0, 0.0)

    def test_perfect_class(self):
        cm = confusion([0, 1, 0, 1], [0, 1, 0, 1], 2)
        assert precision_recall_f1(cm, 0) == (1.0, 1.0, 1.0)

    def test_f1_of_equal_precision_recall_is_exact(self):
        # counts with FP == FN make precision == recall; F1 must equal them
        # bit for bit, including awkward ratios like 0.1.
        for tp, fpfn in [(1, 9), (3, 7), (7, 3), (1, 1), (10, 0)]:
            cm_counts = np.zeros((2, 2), dtype=np.int64)
            cm_counts[0, 0] = tp
            cm_counts[1, 0] = fpfn  # false positives
            cm_counts[0, 1] = fpfn  # false negatives
            p, r, f1 = precision_recall_f1(ConfusionMatrix(cm_counts), 0)
            assert p == r
            assert f1 == p

    def test_f1_helper_identities(self):
        assert f1_score(0.5, 1.0) == 2.0 / 3.0
        for r in [0.1, 0.3, 1 / 3, 0.7, 0.99, 1.0]:
            assert f1_score(r, r) == r
        assert f1_score(0.0, 0.0) == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_oracle_equivalence_random(self, seed):
        rng = np.random.default_rng(seed)
        n_classes = int(rng.integers(2, 10))
        n = int(rng.integers(5, 200))
        true = rng.integers(0, n_classes, n)
        pred = rng.integers(0, n_classes, n)
        report = MetricsReport.from_predictions(true, pred, n_classes)
        acc, per_class = oracle_metrics(true.tolist(), pred.tolist(), n_classes)
        assert abs(report.accuracy - acc) < 1e-12
        for c in range(n_classes):
            assert abs(report.per_class[c].precision - per_class[c][0]) < 1e-12
            assert abs(report.per_class[c].recall - per_class[c][1]) < 1e-12
            assert abs(report.per_class[c].f1 - per_class[c][2]) < 1e-12

    def test_oracle_equivalence_many_small_sets(self):
        rng = np.random.default_rng(999)
        for _ in range(1000):
            n = int(rng.integers(3, 40))
            true = rng.integers(0, 4, n)
            pred = rng.integers(0, 4, n)
            report = MetricsReport.from_predictions(true, pred, 4)
            acc, per_class = oracle_metrics(true.tolist(), pred.tolist(), 4)
            assert abs(report.accuracy - acc) < 1e-12
            for c in range(4):
                for got, want in zip(
                    (report.per_class[c].precision, report.per_class[c].recall, report.per_class[c].f1),
                    per_class[c],
                ):
                    assert abs(got - want) < 1e-12


class TestAggregate:
    def test_hand_example_mean_and_sample_std(self):
        reports = []
        for acc_target in (0.5, 0.6):
            n = 10
            correct = int(acc_target * n)
            true = np.zeros(n, dtype=np.int64)
            pred = np.concatenate([np.zeros(correct, dtype=np.int64), np.ones(n - correct, dtype=np.int64)])
            reports.append(MetricsReport.from_predictions(true, pred, 2))
        agg = aggregate(reports)
        assert abs(agg.accuracy.mean - 0.55) < 1e-12
        assert abs(agg.accuracy.std - np.sqrt(0.005)) < 1e-12
        assert format_mean_std(agg.accuracy) == "55.00±7.07"

    def test_single_run_flagged_with_zero_std(self):
        r = MetricsReport.from_predictions([0, 1], [0, 1], 2)
        agg = aggregate([r])
        assert agg.single_run
        assert agg.accuracy.std == 0.0

    def test_formatting_fraction(self):
        r1 = MetricsReport.from_predictions([0] * 3 + [1], [0, 0, 1, 1], 2)
        agg = aggregate([r1, r1])
        text = format_mean_std(agg.per_class[0]["f1"], percent=False)
        assert "±" in text and text.endswith("0.00")

    def test_mismatched_class_counts_rejected(self):
        r1 = MetricsReport.from_predictions([0, 1], [0, 1], 2)
        r2 = MetricsReport.from_predictions([0, 1], [0, 1], 3)
        with pytest.raises(ValueError):
            aggregate([r1, r2])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])
