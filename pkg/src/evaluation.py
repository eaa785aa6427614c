"""
evaluation.py – Positional error metrics and run reports.

Errors are taken at estimate timestamps against ground truth linearly
interpolated to the same instant, in millimeters.  Heading errors are
available for diagnostics but do not enter the report.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np

from config import QUOTED_IMPROVEMENTS
from error_handling import SpanError
from world import Pose2D, normalize_angles

BASELINE = "lasernav"
METHOD = "pf"

# Report columns use the short name for the laser-only arm.
COLUMN_NAMES = {"lasernav": "laser"}
ALIASES = {"laser": "lasernav"}

SPAN_TOLERANCE = 1e-9


class Timed(Protocol):
    t: float
    pose: Pose2D


class ErrorSummary(NamedTuple):
    rmse: float       # mm
    variance: float   # mm²


def canonical_name(name: str) -> str:
    return ALIASES.get(name, name)


def column_name(name: str) -> str:
    return COLUMN_NAMES.get(name, name)


# ── Metrics ──────────────────────────────────────────────────────────────────

def _times(est: Sequence[Timed], truth: Sequence[Timed]) -> Tuple[np.ndarray, np.ndarray]:
    """Validated estimate and truth timestamps."""
    if not truth:
        raise ValueError("truth trajectory is empty")
    t_truth = np.array([s.t for s in truth])
    if np.any(np.diff(t_truth) <= 0):
        raise ValueError("truth timestamps must be strictly increasing")
    t_est = np.array([s.t for s in est])
    if t_est.size == 0:
        return t_est, t_truth
    if np.any(np.diff(t_est) < 0):
        raise ValueError("estimate timestamps must be nondecreasing")
    if t_est[0] < t_truth[0] - SPAN_TOLERANCE or t_est[-1] > t_truth[-1] + SPAN_TOLERANCE:
        raise SpanError(
            f"estimates span [{t_est[0]!r}, {t_est[-1]!r}] outside truth span "
            f"[{t_truth[0]!r}, {t_truth[-1]!r}]"
        )
    return t_est, t_truth


def position_errors(est: Sequence[Timed], truth: Sequence[Timed]) -> np.ndarray:
    """Distance in mm from each estimate to the interpolated truth position."""
    t_est, t_truth = _times(est, truth)
    if t_est.size == 0:
        return np.zeros(0)
    x = np.interp(t_est, t_truth, [s.pose.x for s in truth])
    y = np.interp(t_est, t_truth, [s.pose.y for s in truth])
    ex = np.array([s.pose.x for s in est]) - x
    ey = np.array([s.pose.y for s in est]) - y
    return 1000.0 * np.hypot(ex, ey)


def heading_errors(est: Sequence[Timed], truth: Sequence[Timed]) -> np.ndarray:
    """Signed heading error in radians, wrapped to (-π, π]; truth heading is
    unwrapped before interpolation."""
    t_est, t_truth = _times(est, truth)
    if t_est.size == 0:
        return np.zeros(0)
    theta = np.interp(t_est, t_truth, np.unwrap([s.pose.theta for s in truth]))
    return normalize_angles(np.array([s.pose.theta for s in est]) - theta)


def summarize(errors: Sequence[float]) -> ErrorSummary:
    """RMSE and population variance of an error list."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("cannot summarize an empty error list")
    return ErrorSummary(float(math.sqrt(np.mean(e * e))), float(np.var(e)))


def improvement(baseline_rmse: float, method_rmse: float) -> float:
    """Percentage reduction of *method_rmse* relative to *baseline_rmse*."""
    if not baseline_rmse > 0:
        raise ValueError(f"baseline RMSE must be > 0, got {baseline_rmse!r}")
    return 100.0 * (baseline_rmse - method_rmse) / baseline_rmse


# ── Reports ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RunStats:
    run: int
    stats: Dict[str, ErrorSummary]


@dataclass
class RunReport:
    """Per-run RMSE and variance for each estimator, their averages over
    runs, and the improvement of every other arm over the laser baseline."""

    estimators: Tuple[str, ...]
    per_run: List[RunStats]
    quoted_improvements: Dict[str, float] = field(default_factory=lambda: dict(QUOTED_IMPROVEMENTS))

    def __post_init__(self):
        if not self.per_run:
            raise ValueError("a report needs at least one run")

    @property
    def averages(self) -> Dict[str, ErrorSummary]:
        out = {}
        for name in self.estimators:
            rows = [r.stats[name] for r in self.per_run if name in r.stats]
            if rows:
                out[name] = ErrorSummary(
                    float(np.mean([s.rmse for s in rows])),
                    float(np.mean([s.variance for s in rows])),
                )
        return out

    @property
    def improvements(self) -> Dict[str, float]:
        """Improvement of each arm's average RMSE over the baseline's."""
        avg = self.averages
        if BASELINE not in avg or avg[BASELINE].rmse <= 0:
            return {}
        return {
            name: improvement(avg[BASELINE].rmse, summary.rmse)
            for name, summary in avg.items()
            if name != BASELINE
        }

    @property
    def improvement_pct(self) -> Optional[float]:
        return self.improvements.get(METHOD)

    def to_dict(self) -> Dict[str, object]:
        def cols(stats: Mapping[str, ErrorSummary]) -> Dict[str, Optional[float]]:
            row: Dict[str, Optional[float]] = {}
            for name in self.estimators:
                s = stats.get(name)
                row[f"{column_name(name)}_rmse"] = None if s is None else s.rmse
                row[f"{column_name(name)}_var"] = None if s is None else s.variance
            return row

        return {
            "estimators": list(self.estimators),
            "per_run": [dict(run=r.run, **cols(r.stats)) for r in self.per_run],
            "average": cols(self.averages),
            "improvement_pct": self.improvement_pct,
            "improvements": self.improvements,
            "quoted_improvements": dict(self.quoted_improvements),
        }


def order_estimators(names: Sequence[str]) -> Tuple[str, ...]:
    """Baseline first, then the filter, then any other arms in given order."""
    names = [canonical_name(n) for n in names]
    head = [n for n in (BASELINE, METHOD) if n in names]
    return tuple(head + [n for n in names if n not in head])


def build_report(runs: Sequence[Mapping[str, Sequence[float]]]) -> RunReport:
    """Summarize one mapping of estimator name → error list per run.  Runs
    are numbered from 1.  An arm with no errors in a run is left out of that
    run's row."""
    names: List[str] = []
    for run in runs:
        for name in run:
            if canonical_name(name) not in names:
                names.append(canonical_name(name))
    per_run = []
    for i, run in enumerate(runs, start=1):
        stats = {
            canonical_name(name): summarize(errors)
            for name, errors in run.items()
            if len(errors) > 0
        }
        per_run.append(RunStats(i, stats))
    return RunReport(order_estimators(names), per_run)


def error_table(
    errors: Mapping[str, Tuple[Sequence[float], Sequence[float]]]
) -> Tuple[Tuple[str, ...], List[Tuple[float, Dict[str, float]]]]:
    """Outer-join per-estimator (timestamps, errors) on timestamp.

    Returns the ordered estimator names and rows of (t, {name: error_mm}).
    """
    names = order_estimators(list(errors))
    joined: Dict[float, Dict[str, float]] = {}
    for name, (times, errs) in errors.items():
        for t, e in zip(times, errs):
            joined.setdefault(float(t), {})[canonical_name(name)] = float(e)
    return names, sorted(joined.items())


def format_report(report: RunReport) -> str:
    """Plain-text table in the shape of the comparison table."""
    headers = ["run"]
    for name in report.estimators:
        headers += [f"{column_name(name)}_rmse", f"{column_name(name)}_var"]
    lines = ["  ".join(f"{h:>14}" for h in headers)]

    def row(label: str, stats: Mapping[str, ErrorSummary]) -> str:
        cells = [f"{label:>14}"]
        for name in report.estimators:
            s = stats.get(name)
            cells += ([f"{s.rmse:>14.4f}", f"{s.variance:>14.4f}"] if s is not None
                      else [f"{'-':>14}", f"{'-':>14}"])
        return "  ".join(cells)

    for r in report.per_run:
        lines.append(row(str(r.run), r.stats))
    lines.append(row("average", report.averages))
    for name, pct in report.improvements.items():
        lines.append(f"improvement of {name} over {BASELINE}: {pct:.2f}%")
    if report.improvement_pct is not None:
        quoted = ", ".join(f"{k} {v:.1f}%" for k, v in report.quoted_improvements.items())
        lines.append(f"quoted improvements: {quoted}")
    return "\n".join(lines)
