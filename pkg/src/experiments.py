"""
experiments.py – Multi-run protocol and the checks built on top of it.

  * run_once / run_protocol  – simulate, run every estimator, score, report
  * amplification_sweep      – laser-fix error growth with the sensor offset
  * convergence_trials       – global localization of a stationary vehicle
  * clutter_comparison       – clean versus cluttered scans

Each experiment returns a small result dataclass with ``to_dict`` for JSON
output and ``summary`` for the terminal.
"""

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import REFERENCE_RUNS, NoiseModel, RunConfig
from estimators import TrajectoryRow, run_estimator
from evaluation import RunReport, build_report, heading_errors, position_errors, summarize
from kinematics import rotation_center_to_sensor, sensor_to_rotation_center
from logger import get_logger
from pf import ParticleFilter
from sim import SensorFrame, TruthSample, generate_truth, simulate_scan, simulate_sensors
from world import Pose2D

log = get_logger("experiments")

MAIN_ESTIMATORS = ("lasernav", "pf")
ALL_ESTIMATORS = ("lasernav", "pf", "deadreckon")
AMPLIFICATION_OFFSETS = (0.5, 1.2, 2.0)
HEADING_ERROR = 1e-3             # rad, injected for the offset-conversion check
CONVERGENCE_TRIALS = 100
CONVERGENCE_CORRECTIONS = 10
CONVERGENCE_TOLERANCE = 0.25     # m, the redistribution range
CLUTTER_RATE = 2.0


@dataclass
class RunOutcome:
    seed: int
    truth: List[TruthSample]
    frames: List[SensorFrame]
    trajectories: Dict[str, List[TrajectoryRow]]
    errors: Dict[str, np.ndarray]
    seconds: Dict[str, float]


def run_once(cfg: RunConfig, estimators: Sequence[str] = ALL_ESTIMATORS) -> RunOutcome:
    """Simulate one run of *cfg* and score every estimator against truth."""
    truth = generate_truth(cfg.trajectory, cfg.vehicle, cfg.timing.tick)
    frames = simulate_sensors(truth, cfg.map, cfg.vehicle, cfg.noise, cfg.seed, cfg.timing)
    trajectories: Dict[str, List[TrajectoryRow]] = {}
    errors: Dict[str, np.ndarray] = {}
    seconds: Dict[str, float] = {}
    for name in estimators:
        start = time.perf_counter()
        rows = run_estimator(name, frames, cfg)
        seconds[name] = time.perf_counter() - start
        trajectories[name] = rows
        errors[name] = position_errors(rows, truth)
    return RunOutcome(cfg.seed, truth, frames, trajectories, errors, seconds)


@dataclass
class ProtocolResult:
    report: RunReport
    outcomes: List[RunOutcome]

    def to_dict(self) -> Dict[str, object]:
        return {
            "seeds": [o.seed for o in self.outcomes],
            "seconds": [o.seconds for o in self.outcomes],
            **self.report.to_dict(),
        }


def run_protocol(cfg: RunConfig, runs: int = REFERENCE_RUNS,
                 estimators: Sequence[str] = ALL_ESTIMATORS) -> ProtocolResult:
    """*runs* repetitions with seeds ``cfg.seed .. cfg.seed + runs - 1``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    outcomes = []
    for k in range(runs):
        outcome = run_once(cfg.with_seed(cfg.seed + k), estimators)
        summary = ", ".join(
            f"{name} {summarize(e).rmse:.2f} mm" for name, e in outcome.errors.items() if e.size
        )
        log.info("run %d/%d (seed %d): %s", k + 1, runs, outcome.seed, summary)
        outcomes.append(outcome)
    report = build_report([o.errors for o in outcomes])
    return ProtocolResult(report, outcomes)


# ── Offset amplification ─────────────────────────────────────────────────────

def conversion_shift(d: float, heading_error: float = HEADING_ERROR) -> float:
    """Position shift (m) that a heading error in a laser fix causes once the
    fix is moved back by the sensor offset *d*."""
    truth = Pose2D(0.0, 0.0, 0.0)
    sensor = rotation_center_to_sensor(truth, d)
    skewed = Pose2D(sensor.x, sensor.y, sensor.theta + heading_error)
    return sensor_to_rotation_center(skewed, d).distance_to(truth)


def _slope(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope and its standard error."""
    slope, intercept = np.polyfit(x, y, 1)
    n = x.size
    if n <= 2:
        return float(slope), float("nan")
    resid = y - (slope * x + intercept)
    sxx = float(np.sum((x - x.mean()) ** 2))
    return float(slope), float(math.sqrt(np.sum(resid ** 2) / (n - 2) / sxx))


@dataclass
class AmplificationResult:
    """RMSE of both arms per sensor offset, plus how much of the laser error
    is the heading error of each fix carried through the offset."""

    offsets: List[float]
    heading_error: float
    shift_per_mrad: List[float]          # mm of shift per mrad, per offset
    laser_rmse: Dict[float, List[float]]
    pf_rmse: Dict[float, List[float]]
    laser_slope: float                   # mm of RMSE per m of offset
    laser_slope_stderr: float
    pf_slope: float
    pf_slope_stderr: float
    laser_heading_rms: Dict[float, List[float]] = field(default_factory=dict)     # mrad
    laser_amplified_rms: Dict[float, List[float]] = field(default_factory=dict)   # mm

    @property
    def pf_slope_flat(self) -> bool:
        """PF slope within three standard errors of zero."""
        return abs(self.pf_slope) <= 3.0 * self.pf_slope_stderr

    @property
    def amplified_per_mrad(self) -> List[float]:
        """Measured amplified laser error per mrad of fix heading error, mm,
        per offset; tracks ``shift_per_mrad``."""
        out = []
        for d in self.offsets:
            heading = float(np.mean(self.laser_heading_rms.get(d, [0.0])))
            amplified = float(np.mean(self.laser_amplified_rms.get(d, [0.0])))
            out.append(amplified / heading if heading > 0 else float("nan"))
        return out

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        for key in ("laser_rmse", "pf_rmse", "laser_heading_rms", "laser_amplified_rms"):
            out[key] = {str(d): v for d, v in getattr(self, key).items()}
        out["pf_slope_flat"] = self.pf_slope_flat
        out["amplified_per_mrad"] = self.amplified_per_mrad
        return out

    def summary(self) -> str:
        lines = [f"{'d (m)':>8}  {'shift mm/mrad':>14}  {'measured':>9}  {'laser rmse':>11}  {'pf rmse':>9}"]
        for d, shift, measured in zip(self.offsets, self.shift_per_mrad, self.amplified_per_mrad):
            lines.append(f"{d:>8.2f}  {shift:>14.4f}  {measured:>9.4f}  {np.mean(self.laser_rmse[d]):>11.3f}"
                         f"  {np.mean(self.pf_rmse[d]):>9.3f}")
        lines.append(f"laser slope {self.laser_slope:.3f} ± {self.laser_slope_stderr:.3f} mm/m")
        lines.append(f"pf slope {self.pf_slope:.3f} ± {self.pf_slope_stderr:.3f} mm/m"
                     f" ({'flat' if self.pf_slope_flat else 'not flat'} at 3σ)")
        return "\n".join(lines)


def amplified_error(heading_err: np.ndarray, d: float) -> np.ndarray:
    """Position error (mm) that heading errors (rad) cause when a fix is
    moved back by the sensor offset *d*: the chord 2·d·|sin(ε/2)|."""
    return 2000.0 * d * np.abs(np.sin(0.5 * np.asarray(heading_err)))


def _rms(values: np.ndarray) -> float:
    return float(math.sqrt(np.mean(values * values))) if values.size else 0.0


def amplification_sweep(
    cfg: RunConfig,
    offsets: Sequence[float] = AMPLIFICATION_OFFSETS,
    runs_per_offset: int = 3,
    heading_error: float = HEADING_ERROR,
) -> AmplificationResult:
    """Repeat the protocol with the LRF mounted at each offset and regress
    RMSE on the offset for both main estimators."""
    laser: Dict[float, List[float]] = {}
    pf: Dict[float, List[float]] = {}
    heading_rms: Dict[float, List[float]] = {}
    amplified_rms: Dict[float, List[float]] = {}
    xs, laser_ys, pf_ys = [], [], []
    for d in offsets:
        cfg_d = replace(cfg, vehicle=replace(cfg.vehicle, d=d))
        result = run_protocol(cfg_d, runs_per_offset, MAIN_ESTIMATORS)
        laser[d] = [r.stats["lasernav"].rmse for r in result.report.per_run]
        pf[d] = [r.stats["pf"].rmse for r in result.report.per_run]
        heading_rms[d], amplified_rms[d] = [], []
        for outcome in result.outcomes:
            eps = heading_errors(outcome.trajectories["lasernav"], outcome.truth)
            heading_rms[d].append(1e3 * _rms(eps))
            amplified_rms[d].append(_rms(amplified_error(eps, d)))
        xs += [d] * len(laser[d])
        laser_ys += laser[d]
        pf_ys += pf[d]
        log.info("offset %.2f m: laser %.2f mm (heading %.2f mrad), pf %.2f mm",
                 d, np.mean(laser[d]), np.mean(heading_rms[d]), np.mean(pf[d]))
    x = np.array(xs)
    l_slope, l_err = _slope(x, np.array(laser_ys))
    p_slope, p_err = _slope(x, np.array(pf_ys))
    shifts = [1e3 * conversion_shift(d, heading_error) / (heading_error * 1e3) for d in offsets]
    return AmplificationResult(list(offsets), heading_error, shifts, laser, pf,
                               l_slope, l_err, p_slope, p_err, heading_rms, amplified_rms)


# ── Global convergence ───────────────────────────────────────────────────────

@dataclass
class ConvergenceResult:
    trials: int
    successes: int
    corrections: int
    tolerance: float
    corrections_needed: List[int] = field(default_factory=list)   # -1 when never converged

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {**asdict(self), "rate": self.rate}

    def summary(self) -> str:
        done = [n for n in self.corrections_needed if n > 0]
        median = f"{np.median(done):.1f}" if done else "-"
        return (f"converged within {self.tolerance:.2f} m in ≤ {self.corrections} corrections: "
                f"{self.successes}/{self.trials} (median {median} corrections)")


def convergence_trials(
    cfg: RunConfig,
    trials: int = CONVERGENCE_TRIALS,
    corrections: int = CONVERGENCE_CORRECTIONS,
    tolerance: float = CONVERGENCE_TOLERANCE,
) -> ConvergenceResult:
    """Uniform start with the global-localization settings
    (``cfg.pf_global``), vehicle parked at the trajectory's initial pose,
    noiseless scans.  A trial succeeds, and stops, once an estimate lands
    within *tolerance* of the true position."""
    truth = cfg.trajectory.initial_pose
    noise = NoiseModel.noiseless(max_lrf_range=cfg.noise.max_lrf_range)
    sensor = rotation_center_to_sensor(truth, cfg.vehicle.d)
    scan = simulate_scan(sensor, cfg.map, noise, np.random.default_rng(cfg.seed))
    if len(scan.detections) < 3:
        log.warning("only %d reflectors visible from the parking pose", len(scan.detections))

    needed = []
    for k in range(trials):
        pf = ParticleFilter(cfg.map, cfg.vehicle, cfg.pf_global, cfg.seed + k)
        hit = -1
        for i in range(corrections):
            est = pf.step(SensorFrame(i * cfg.timing.lrf_period, scan))
            if est is not None and est.pose.distance_to(truth) <= tolerance:
                hit = i + 1
                break
        needed.append(hit)
    successes = sum(1 for n in needed if n > 0)
    log.info("convergence: %d/%d trials", successes, trials)
    return ConvergenceResult(trials, successes, corrections, tolerance, needed)


# ── Clutter robustness ───────────────────────────────────────────────────────

@dataclass
class ClutterResult:
    clutter_rate: float
    clean: Dict[str, float]
    cluttered: Dict[str, float]

    @property
    def ratios(self) -> Dict[str, float]:
        return {name: self.cluttered[name] / self.clean[name]
                for name in self.clean if self.clean[name] > 0}

    def to_dict(self) -> Dict[str, object]:
        return {**asdict(self), "ratios": self.ratios}

    def summary(self) -> str:
        lines = [f"{'arm':>10}  {'clean':>9}  {'clutter':>9}  {'ratio':>6}"]
        for name, ratio in self.ratios.items():
            lines.append(f"{name:>10}  {self.clean[name]:>9.3f}  {self.cluttered[name]:>9.3f}  {ratio:>6.2f}")
        return "\n".join(lines)


def clutter_comparison(cfg: RunConfig, clutter_rate: float = CLUTTER_RATE,
                       runs: int = REFERENCE_RUNS) -> ClutterResult:
    """Average RMSE of both main arms with and without false detections."""
    clean = run_protocol(replace(cfg, noise=replace(cfg.noise, clutter_rate=0.0)), runs, MAIN_ESTIMATORS)
    noisy = run_protocol(replace(cfg, noise=replace(cfg.noise, clutter_rate=clutter_rate)),
                         runs, MAIN_ESTIMATORS)
    return ClutterResult(
        clutter_rate,
        {n: s.rmse for n, s in clean.report.averages.items()},
        {n: s.rmse for n, s in noisy.report.averages.items()},
    )
