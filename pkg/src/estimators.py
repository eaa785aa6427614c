"""
estimators.py – The estimator arms compared by every experiment.

  * pf          – reflector particle filter fusing odometry and LRF, from the known start
  * lasernav    – laser-only fixes, one per LRF scan that matches ≥ 2 reflectors
  * deadreckon  – first-order integration of odometry from the known start

All three consume the same time-ordered frame stream and return rows of one
shared trajectory schema.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence

from config import RunConfig
from error_handling import TimeOrderError
from kinematics import BodyTwist, integrate_pose
from lasernav import LaserNavigator
from logger import get_logger
from pf import ParticleFilter, initialize_around, odometry_twist
from sim import LrfScan, Odometry, SensorFrame
from world import Pose2D

log = get_logger("estimators")


@dataclass(frozen=True)
class TrajectoryRow:
    """One emitted estimate.  Columns an arm does not produce stay None."""

    t: float
    pose: Pose2D
    n_matched: Optional[int] = None
    residual_rms: Optional[float] = None
    degenerate: Optional[bool] = None


Estimator = Callable[[Sequence[SensorFrame], RunConfig], List[TrajectoryRow]]


def _in_order(frames: Iterable[SensorFrame]) -> Iterator[SensorFrame]:
    last_t = None
    for frame in frames:
        if last_t is not None and frame.t < last_t:
            raise TimeOrderError(frame.t, last_t)
        last_t = frame.t
        yield frame


def run_pf(frames: Sequence[SensorFrame], cfg: RunConfig) -> List[TrajectoryRow]:
    """Particle filter started around the known initial pose, within the
    redistribution box, as the laser-only arm is."""
    start = frames[0].t if frames else 0.0
    particles = initialize_around(cfg.trajectory.initial_pose, cfg.pf, cfg.seed,
                                  cfg.pf.redistribution_range, cfg.pf.heading_jitter)
    pf = ParticleFilter(cfg.map, cfg.vehicle, cfg.pf, cfg.seed, start_time=start, particles=particles)
    rows = []
    for frame in frames:
        est = pf.step(frame)
        if est is not None:
            rows.append(TrajectoryRow(est.t, est.pose, est.n_matched, None, est.degenerate))
    log.info("pf: %d estimates, %d degenerate scans", len(rows), pf.degenerate_scans)
    return rows


def run_lasernav(frames: Sequence[SensorFrame], cfg: RunConfig) -> List[TrajectoryRow]:
    """Laser-only fixes, seeded with the known initial pose."""
    ln = cfg.lasernav
    nav = LaserNavigator(cfg.map, cfg.vehicle, cfg.trajectory.initial_pose, ln.gate,
                         ln.extrapolate, ln.search_turn, ln.search_step,
                         ln.min_match_fraction, ln.refine)
    rows = []
    for frame in _in_order(frames):
        if not isinstance(frame.payload, LrfScan):
            continue
        fix = nav.update(frame.t, frame.payload)
        if fix is not None:
            rows.append(TrajectoryRow(frame.t, fix.pose, fix.n_matched, fix.residual_rms, None))
    log.info("lasernav: %d fixes, %d scans without a fix, %d heading searches",
             len(rows), nav.failures, nav.searches)
    return rows


def run_deadreckon(frames: Sequence[SensorFrame], cfg: RunConfig) -> List[TrajectoryRow]:
    """Odometry-only integration; one row per odometry frame."""
    pose = cfg.trajectory.initial_pose
    last_t = frames[0].t if frames else 0.0
    rows = []
    for frame in _in_order(frames):
        if not isinstance(frame.payload, Odometry):
            continue
        dt = frame.t - last_t
        last_t = frame.t
        if dt > 0:
            v, w = odometry_twist(frame.payload, cfg.vehicle, cfg.pf.angular_source)
            pose = integrate_pose(pose, BodyTwist(v, w), dt)
        rows.append(TrajectoryRow(frame.t, pose))
    log.info("deadreckon: %d poses", len(rows))
    return rows


ESTIMATORS: Dict[str, Estimator] = {
    "pf": run_pf,
    "lasernav": run_lasernav,
    "deadreckon": run_deadreckon,
}


def run_estimator(name: str, frames: Sequence[SensorFrame], cfg: RunConfig) -> List[TrajectoryRow]:
    try:
        estimator = ESTIMATORS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATORS)}") from None
    return estimator(frames, cfg)
