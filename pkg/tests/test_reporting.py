"""Tests for seed aggregation and variant comparison."""

import pytest

from src import reporting
from src.utils.exceptions import ContractViolation


class TestAggregate:

    def test_sample_standard_deviation(self):
        """Std uses ddof=1."""
        summary = reporting.aggregate([0.9, 0.92, 0.94])
        assert summary["mean"] == pytest.approx(0.92)
        assert summary["std"] == pytest.approx(0.02)
        assert summary["n"] == 3

    def test_single_run(self):
        """One value has zero spread."""
        assert reporting.aggregate([0.5])["std"] == 0.0

    def test_none_values_skipped(self):
        """Missing accuracies are left out."""
        assert reporting.aggregate([0.5, None, 0.7])["n"] == 2

    def test_empty(self):
        """Nothing to aggregate is an error."""
        with pytest.raises(ContractViolation):
            reporting.aggregate([])

    def test_display(self):
        """Percent display with two decimals."""
        assert reporting.format_mean_std({"mean": 0.9766, "std": 0.0008}) == "97.66 ± 0.08"


class TestComparison:

    def test_paired_t_test_needs_two_shared_seeds(self):
        """Fewer than two common seeds yields no p-value."""
        assert reporting.paired_t_test({0: 0.9, 1: 0.8}, {1: 0.7, 2: 0.6}) is None

    def test_identical_runs(self):
        """Identical accuracies are not significantly different."""
        assert reporting.paired_t_test({0: 0.9, 1: 0.8}, {0: 0.9, 1: 0.8}) == 1.0

    def test_consistent_gap_is_significant(self):
        """A steady gap across seeds gives a small p-value."""
        a = {s: 0.95 + 0.001 * (s % 3) for s in range(10)}
        b = {s: 0.90 + 0.0012 * (s % 4) for s in range(10)}
        p = reporting.paired_t_test(a, b)
        assert p < 0.001
        assert reporting.significance_label(p) == "strong"

    def test_rows_sorted_by_mean(self):
        """The best variant comes first and carries the test against the runner-up."""
        rows = reporting.compare_variants({
            "cce": {0: 0.90, 1: 0.91, 2: 0.89},
            "gaussian": {0: 0.95, 1: 0.96, 2: 0.955},
            "cosine": {0: 0.93, 1: 0.92, 2: 0.94},
        })
        assert [r["variant"] for r in rows] == ["gaussian", "cosine", "cce"]
        assert rows[0]["p_value_vs_next"] is not None
        assert rows[1]["p_value_vs_next"] is None

    def test_significance_thresholds(self):
        """Labels follow the p-value thresholds."""
        assert reporting.significance_label(0.0005) == "strong"
        assert reporting.significance_label(0.01) == "significant"
        assert reporting.significance_label(0.2) == ""
        assert reporting.significance_label(None) == ""
