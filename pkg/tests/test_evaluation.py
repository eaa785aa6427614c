"""
Tests for error metrics and run reports
"""

import math
import sys
import os

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from error_handling import SpanError
from evaluation import (
    build_report,
    canonical_name,
    error_table,
    format_report,
    heading_errors,
    improvement,
    position_errors,
    summarize,
)
from sim import TruthSample
from world import Pose2D

# Published comparison-table values used as report fixtures: (rmse, variance) in mm.
TABLE_ROW_1 = {"lasernav": (56.6685, 434.2556), "pf": (20.2012, 81.7710)}
TABLE_AVERAGES = {"lasernav": 56.8978, "pf": 20.4341}


def fixture_errors(rmse, variance, n=1000):
    """Errors alternating μ ± σ so that mean = μ and population variance = σ²."""
    mu = math.sqrt(rmse ** 2 - variance)
    sigma = math.sqrt(variance)
    return [mu + sigma, mu - sigma] * (n // 2)


def line_truth(n=11):
    return [TruthSample(float(t), Pose2D(float(t), 0.0, 0.0)) for t in range(n)]


# ---------------------------------------------------------------------------
# position_errors
# ---------------------------------------------------------------------------

def test_errors_identity():
    """An estimate equal to truth has zero error"""
    truth = line_truth()
    assert np.all(position_errors(truth, truth) == 0.0)


def test_errors_constant_offset():
    """A 1 cm sideways offset is 10 mm everywhere"""
    truth = line_truth()
    est = [TruthSample(s.t, Pose2D(s.pose.x, 0.01, 0.0)) for s in truth]
    assert position_errors(est, truth) == pytest.approx([10.0] * len(truth))


def test_errors_interpolate_truth():
    """Truth is interpolated to the estimate timestamp"""
    truth = [TruthSample(0.0, Pose2D(0, 0)), TruthSample(1.0, Pose2D(1, 0))]
    est = [TruthSample(0.5, Pose2D(0.5, 0.02))]
    assert position_errors(est, truth) == pytest.approx([20.0])


def test_errors_ignore_heading():
    """Heading differences do not count"""
    truth = line_truth()
    est = [TruthSample(s.t, Pose2D(s.pose.x, 0.0, 1.0)) for s in truth]
    assert np.all(position_errors(est, truth) == 0.0)


def test_errors_outside_span_rejected():
    """Estimates past the end of truth are rejected"""
    with pytest.raises(SpanError):
        position_errors([TruthSample(10.5, Pose2D(0, 0))], line_truth())


def test_errors_empty_estimate():
    """No estimates, no errors"""
    assert position_errors([], line_truth()).size == 0


# ---------------------------------------------------------------------------
# heading_errors
# ---------------------------------------------------------------------------

def test_heading_errors_signed_and_wrapped():
    """Errors are signed and wrap across ±π"""
    truth = [TruthSample(0.0, Pose2D(0, 0, math.pi - 0.01)), TruthSample(1.0, Pose2D(0, 0, math.pi - 0.01))]
    est = [TruthSample(0.0, Pose2D(0, 0, -math.pi + 0.01)), TruthSample(1.0, Pose2D(0, 0, math.pi - 0.03))]
    assert heading_errors(est, truth) == pytest.approx([0.02, -0.02])


def test_heading_errors_interpolate_through_wrap():
    """Truth heading is unwrapped before interpolating"""
    truth = [TruthSample(0.0, Pose2D(0, 0, math.pi - 0.1)), TruthSample(1.0, Pose2D(0, 0, -math.pi + 0.1))]
    est = [TruthSample(0.5, Pose2D(0, 0, math.pi))]
    assert heading_errors(est, truth) == pytest.approx([0.0], abs=1e-12)


def test_heading_errors_empty_and_span():
    """No estimates give no errors; estimates past the truth span are rejected"""
    truth = line_truth()
    assert heading_errors([], truth).size == 0
    with pytest.raises(SpanError):
        heading_errors([TruthSample(20.0, Pose2D(0, 0))], truth)


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------

def test_summarize_zeros():
    """All-zero errors summarize to zero"""
    assert summarize([0, 0, 0]) == (0.0, 0.0)


def test_summarize_hand_example():
    """[3, 4] gives rmse √12.5 and variance 0.25"""
    rmse, var = summarize([3, 4])
    assert rmse == pytest.approx(math.sqrt(12.5))
    assert var == pytest.approx(0.25)


def test_summarize_rejects_empty():
    """An empty list cannot be summarized"""
    with pytest.raises(ValueError):
        summarize([])


def test_rmse_variance_identity():
    """rmse² = variance + mean²"""
    rng = np.random.default_rng(6)
    for _ in range(50):
        e = rng.gamma(2.0, 20.0, int(rng.integers(1, 500)))
        rmse, var = summarize(e)
        assert rmse ** 2 == pytest.approx(var + e.mean() ** 2, rel=1e-9)


def test_summarize_permutation_invariant():
    """Order of errors does not matter"""
    rng = np.random.default_rng(1)
    e = rng.uniform(0, 100, 200)
    a = summarize(e)
    b = summarize(rng.permutation(e))
    assert a.rmse == pytest.approx(b.rmse, rel=1e-12)
    assert a.variance == pytest.approx(b.variance, rel=1e-12)


def test_table_row_reproduced():
    """Fixture errors reproduce the published row to four decimals"""
    for rmse, var in TABLE_ROW_1.values():
        got = summarize(fixture_errors(rmse, var))
        assert round(got.rmse, 4) == rmse
        assert round(got.variance, 4) == var


# ---------------------------------------------------------------------------
# improvement
# ---------------------------------------------------------------------------

def test_improvement_examples():
    """No change is 0%, a perfect method 100%"""
    assert improvement(100, 100) == 0.0
    assert improvement(50, 0) == 100.0


def test_improvement_from_table_averages():
    """The table averages give 64.09%"""
    assert improvement(TABLE_AVERAGES["lasernav"], TABLE_AVERAGES["pf"]) == pytest.approx(64.09, abs=0.01)


def test_improvement_formula():
    """improvement(a, b) + 100·b/a = 100"""
    for a, b in [(56.9, 20.4), (10.0, 30.0), (1.0, 0.5)]:
        assert improvement(a, b) + 100 * b / a == pytest.approx(100.0)


def test_improvement_rejects_bad_baseline():
    """The baseline must be positive"""
    with pytest.raises(ValueError):
        improvement(0.0, 1.0)


# ---------------------------------------------------------------------------
# RunReport
# ---------------------------------------------------------------------------

def test_report_columns_and_improvement():
    """Two arms give laser/pf columns and an improvement"""
    run = {name: fixture_errors(*vals) for name, vals in TABLE_ROW_1.items()}
    report = build_report([run])
    data = report.to_dict()
    row = data["per_run"][0]
    assert row["run"] == 1
    assert round(row["laser_rmse"], 4) == 56.6685
    assert round(row["pf_var"], 4) == 81.771
    assert report.improvement_pct == pytest.approx(improvement(56.6685, 20.2012), abs=1e-6)
    assert data["quoted_improvements"] == {"results": 66.5, "summary": 85.5}


def test_report_averages_over_runs():
    """The average row averages RMSE and variance over runs"""
    runs = [{"lasernav": [10.0, 10.0], "pf": [2.0, 4.0]}, {"lasernav": [20.0, 20.0], "pf": [3.0, 3.0]}]
    avg = build_report(runs).averages
    assert avg["lasernav"].rmse == pytest.approx(15.0)
    assert avg["pf"].rmse == pytest.approx((math.sqrt(10.0) + 3.0) / 2)
    assert avg["pf"].variance == pytest.approx(0.5)


def test_report_orders_baseline_first():
    """Columns start with the laser baseline whatever the input order"""
    report = build_report([{"deadreckon": [1.0], "pf": [1.0], "laser": [2.0]}])
    assert report.estimators == ("lasernav", "pf", "deadreckon")
    assert set(report.improvements) == {"pf", "deadreckon"}


def test_report_requires_runs():
    """An empty report is rejected"""
    with pytest.raises(ValueError):
        build_report([])


def test_canonical_name_alias():
    """'laser' names the laser-only arm"""
    assert canonical_name("laser") == "lasernav"
    assert canonical_name("pf") == "pf"


def test_error_table_outer_join():
    """Timestamps missing from one arm leave gaps"""
    names, rows = error_table({"pf": ([0.45, 0.9], [1.0, 2.0]), "lasernav": ([0.45], [5.0])})
    assert names == ("lasernav", "pf")
    assert rows == [(0.45, {"pf": 1.0, "lasernav": 5.0}), (0.9, {"pf": 2.0})]


def test_format_report_mentions_average():
    """The text table has an average row and the improvement"""
    text = format_report(build_report([{"lasernav": [10.0], "pf": [5.0]}]))
    assert "average" in text
    assert "50.00%" in text
