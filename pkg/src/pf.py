"""
pf.py – Reflector particle filter fusing odometry, gyro and LRF detections.

Each particle is a hypothesis of the target rotation center, so laser
measurements are never converted through the sensor offset and its heading
error is not amplified.  The cycle is:

  * initialize   – uniform over the working environment
  * predict      – first-order kinematic step per particle, from encoder
                   speed and the configured turn-rate source, with noise
  * weigh        – project detections from each particle's LRF origin,
                   match them to the map, score with a unit-variance
                   Gaussian kernel of the summed squared miss distance
  * estimate     – weighted mean (circular mean for heading)
  * redistribute – most particles re-seeded around the heaviest quarter,
                   the rest uniform over the environment
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config import AngularSource, PfConfig, VehicleGeometry
from error_handling import TimeOrderError
from kinematics import encoders_to_twist, integrate_poses, rotation_center_to_sensor, sensor_origins
from lasernav import associate
from logger import get_logger
from sim import LrfScan, Odometry, SensorFrame
from world import (
    Pose2D,
    ReflectorDetection,
    ReflectorMap,
    detections_to_arrays,
    normalize_angles,
    project_detections,
)

log = get_logger("pf")

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MATCH_BLOCK_ELEMENTS = 1_000_000


@dataclass(frozen=True)
class Particle:
    pose: Pose2D
    weight: float


@dataclass
class ParticleSet:
    """``poses`` is (M, 3) rows of (x, y, theta); ``weights`` is (M,).

    The generator is threaded through every operation that draws, so a set
    and all sets derived from it share one random stream.
    """

    poses: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator

    def __len__(self) -> int:
        return self.poses.shape[0]

    @property
    def particles(self) -> Tuple[Particle, ...]:
        return tuple(
            Particle(Pose2D(*row), float(w)) for row, w in zip(self.poses, self.weights)
        )

    def replace(self, poses: Optional[np.ndarray] = None,
                weights: Optional[np.ndarray] = None) -> "ParticleSet":
        return ParticleSet(
            self.poses.copy() if poses is None else poses,
            self.weights.copy() if weights is None else weights,
            self.rng,
        )


class WeighResult(NamedTuple):
    particles: ParticleSet
    degenerate_scan: bool


class PfEstimate(NamedTuple):
    t: float
    pose: Pose2D
    n_matched: int
    degenerate: bool


# ── Initialization ───────────────────────────────────────────────────────────

def _uniform_poses(reflector_map: ReflectorMap, n: int, rng: np.random.Generator) -> np.ndarray:
    b = reflector_map.bounds
    poses = np.empty((n, 3))
    poses[:, 0] = rng.uniform(b.xmin, b.xmax, n)
    poses[:, 1] = rng.uniform(b.ymin, b.ymax, n)
    poses[:, 2] = normalize_angles(rng.uniform(-math.pi, math.pi, n))
    return poses


def initialize(reflector_map: ReflectorMap, config: PfConfig, seed: int) -> ParticleSet:
    """M particles spread evenly over the map bounds, equal weights."""
    if config.M < 1:
        raise ValueError("particle count must be >= 1")
    rng = np.random.default_rng(seed)
    poses = _uniform_poses(reflector_map, config.M, rng)
    return ParticleSet(poses, np.full(config.M, 1.0 / config.M), rng)


def initialize_around(pose: Pose2D, config: PfConfig, seed: int,
                      spread: float, heading_spread: float) -> ParticleSet:
    """Tracking-mode start: particles uniform within ±*spread* meters and
    ±*heading_spread* radians of a known pose."""
    rng = np.random.default_rng(seed)
    m = config.M
    poses = np.empty((m, 3))
    poses[:, 0] = pose.x + rng.uniform(-spread, spread, m)
    poses[:, 1] = pose.y + rng.uniform(-spread, spread, m)
    poses[:, 2] = normalize_angles(pose.theta + rng.uniform(-heading_spread, heading_spread, m))
    return ParticleSet(poses, np.full(m, 1.0 / m), rng)


# ── Prediction ───────────────────────────────────────────────────────────────

def odometry_twist(odo: Odometry, geom: VehicleGeometry, source: AngularSource) -> Tuple[float, float]:
    """(v, w): speed from the encoders, turn rate from *source*."""
    enc = encoders_to_twist(odo.w_l, odo.w_r, geom)
    if source is AngularSource.GYRO:
        w = odo.gyro_w
    elif source is AngularSource.ENCODERS:
        w = enc.w
    else:
        w = 0.5 * (odo.gyro_w + enc.w)
    return enc.v, w


def predict(
    pset: ParticleSet,
    odo: Odometry,
    geom: VehicleGeometry,
    dt: float,
    config: PfConfig,
    motion_noise: Optional[Tuple[float, float]] = None,
) -> ParticleSet:
    """Move every particle by one noisy kinematic step.  Weights are kept.

    The noisy twist is drawn once per particle and held over
    ``config.predict_substeps`` equal Euler steps spanning *dt*.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    v_std, w_std = motion_noise if motion_noise is not None else (
        config.motion_v_stddev, config.motion_w_stddev)
    v, w = odometry_twist(odo, geom, config.angular_source)
    m = len(pset)
    v_i = v + pset.rng.normal(0.0, v_std, m)
    w_i = w + pset.rng.normal(0.0, w_std, m)
    poses = pset.poses
    step = dt / config.predict_substeps
    for _ in range(config.predict_substeps):
        poses = integrate_poses(poses, v_i, w_i, step)
    return pset.replace(poses=poses)


# ── Correction ───────────────────────────────────────────────────────────────

def _greedy_costs(distances: np.ndarray, gate: float) -> Tuple[np.ndarray, np.ndarray]:
    """Globally greedy gated matching on a (C, n, K) stack of distance
    matrices at once.  Returns the summed squared matched distance and the
    match count per matrix.

    Each round claims the smallest remaining entry of every matrix; argmin
    over the flattened (n·K) axis breaks ties by row, then column, the same
    order as :func:`lasernav.greedy_match`.
    """
    dist = np.where(distances <= gate, distances, np.inf)
    c, n, k = dist.shape
    flat = dist.reshape(c, n * k)
    sq = np.zeros(c)
    count = np.zeros(c, dtype=int)
    for _ in range(min(n, k)):
        idx = np.argmin(flat, axis=1)
        best = flat[np.arange(c), idx]
        hit = np.flatnonzero(np.isfinite(best))
        if hit.size == 0:
            break
        sq[hit] += best[hit] ** 2
        count[hit] += 1
        rows = idx[hit] // k
        cols = idx[hit] % k
        dist[hit, rows, :] = np.inf
        dist[hit, :, cols] = np.inf
    return sq, count


def match_costs(
    poses: np.ndarray,
    detections: Sequence[ReflectorDetection],
    reflector_map: ReflectorMap,
    gate: float,
    d: float = 0.0,
    distance_scale: float = 1.0,
    unmatched_penalty: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-particle summed squared miss distance D and match count.

    Distances are divided by *distance_scale* before squaring; each
    unmatched detection adds *unmatched_penalty* (m², default gate²) on the
    same scale.  Particles are processed in blocks of about
    ``MATCH_BLOCK_ELEMENTS`` distance entries.
    """
    if not gate > 0:
        raise ValueError(f"gate must be > 0, got {gate!r}")
    penalty = gate ** 2 if unmatched_penalty is None else unmatched_penalty
    m = poses.shape[0]
    n = len(detections)
    costs = np.zeros(m)
    matched = np.zeros(m, dtype=int)
    if n == 0:
        return costs, matched
    ranges, bearings = detections_to_arrays(detections)
    refs = reflector_map.positions
    block = max(1, MATCH_BLOCK_ELEMENTS // max(1, n * refs.shape[0]))
    for start in range(0, m, block):
        stop = min(m, start + block)
        points = project_detections(sensor_origins(poses[start:stop], d), ranges, bearings)
        diff = points[:, :, None, :] - refs[None, None, :, :]
        sq, count = _greedy_costs(np.sqrt(np.sum(diff * diff, axis=-1)), gate)
        costs[start:stop] = sq + (n - count) * penalty
        matched[start:stop] = count
    return costs / (distance_scale * distance_scale), matched


def likelihood(costs: np.ndarray) -> np.ndarray:
    """Standard-normal density applied to the summed squared distance."""
    return INV_SQRT_2PI * np.exp(-0.5 * costs)


def weigh(
    pset: ParticleSet,
    scan: LrfScan,
    reflector_map: ReflectorMap,
    gate: float,
    d: float = 0.0,
    distance_scale: float = 1.0,
    unmatched_penalty: Optional[float] = None,
) -> WeighResult:
    """Score every particle against *scan* and normalize.

    An empty scan leaves the weights as they are.  If every raw weight
    underflows to zero the weights become uniform and the result is flagged
    ``degenerate_scan``.
    """
    if not scan.detections:
        return WeighResult(pset.replace(), False)
    costs, _ = match_costs(pset.poses, scan.detections, reflector_map, gate,
                           d, distance_scale, unmatched_penalty)
    raw = likelihood(costs)
    total = raw.sum()
    m = len(pset)
    if not total > 0:
        return WeighResult(pset.replace(weights=np.full(m, 1.0 / m)), True)
    return WeighResult(pset.replace(weights=raw / total), False)


def estimate(pset: ParticleSet, arithmetic_heading_mean: bool = False) -> Pose2D:
    """Weighted mean pose.  Heading uses the circular mean unless
    *arithmetic_heading_mean* asks for the plain weighted average."""
    w = pset.weights
    total = float(w.sum())
    if not total > 0:
        raise ValueError("cannot estimate from a set whose weights are all zero")
    x = float(np.dot(w, pset.poses[:, 0])) / total
    y = float(np.dot(w, pset.poses[:, 1])) / total
    if arithmetic_heading_mean:
        theta = float(np.dot(w, pset.poses[:, 2])) / total
    else:
        theta = math.atan2(float(np.dot(w, np.sin(pset.poses[:, 2]))),
                           float(np.dot(w, np.cos(pset.poses[:, 2]))))
    return Pose2D(x, y, theta)


def effective_sample_size(pset: ParticleSet) -> float:
    w = pset.weights / pset.weights.sum()
    return float(1.0 / np.sum(w * w))


# ── Redistribution ───────────────────────────────────────────────────────────

def _share(fraction: float, m: int) -> int:
    return int(math.ceil(round(fraction * m, 9)))


def split_counts(config: PfConfig) -> Tuple[int, int]:
    """(exploit, uniform) particle counts for one redistribution."""
    exploit = min(config.M, _share(config.exploit_fraction, config.M))
    return exploit, config.M - exploit


def elite_indices(weights: np.ndarray, quantile: float) -> np.ndarray:
    """Indices of the heaviest ``ceil(quantile·M)`` particles, heaviest first
    (ties keep index order)."""
    n_elite = max(1, _share(quantile, weights.shape[0]))
    return np.argsort(-weights, kind="stable")[:n_elite]


def sample_anchors(weights: np.ndarray, quantile: float, n: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw *n* anchor indices from the elite, proportionally to weight."""
    elite = elite_indices(weights, quantile)
    elite_w = weights[elite]
    total = elite_w.sum()
    p = elite_w / total if total > 0 else np.full(elite.shape[0], 1.0 / elite.shape[0])
    return elite[rng.choice(elite.shape[0], size=n, p=p)]


def redistribute(pset: ParticleSet, reflector_map: ReflectorMap, config: PfConfig) -> ParticleSet:
    """Replace the set: exploit particles jittered uniformly around elite
    anchors (±range in x and y, ±heading_jitter in theta), the remainder
    uniform over the map.  All weights become 1/M."""
    m = len(pset)
    n_exploit = min(m, _share(config.exploit_fraction, m))
    rng = pset.rng
    poses = np.empty((m, 3))
    if n_exploit:
        anchors = sample_anchors(pset.weights, config.elite_quantile, n_exploit, rng)
        r = config.redistribution_range
        j = config.heading_jitter
        poses[:n_exploit, 0] = pset.poses[anchors, 0] + rng.uniform(-r, r, n_exploit)
        poses[:n_exploit, 1] = pset.poses[anchors, 1] + rng.uniform(-r, r, n_exploit)
        poses[:n_exploit, 2] = normalize_angles(pset.poses[anchors, 2] + rng.uniform(-j, j, n_exploit))
    if n_exploit < m:
        poses[n_exploit:] = _uniform_poses(reflector_map, m - n_exploit, rng)
    return ParticleSet(poses, np.full(m, 1.0 / m), rng)


# ── Filter state machine ─────────────────────────────────────────────────────

class ParticleFilter:
    """Consumes a time-ordered frame stream: odometry frames predict, LRF
    frames correct, emit an estimate and redistribute.

    A scan that arrives after the last odometry frame is corrected at its
    own timestamp: the set is first carried forward with the most recent
    odometry.
    """

    def __init__(
        self,
        reflector_map: ReflectorMap,
        geom: VehicleGeometry,
        config: PfConfig,
        seed: int,
        start_time: float = 0.0,
        particles: Optional[ParticleSet] = None,
    ):
        self.map = reflector_map
        self.geom = geom
        self.config = config
        self.particles = particles if particles is not None else initialize(reflector_map, config, seed)
        self.last_t = start_time
        self.last_predict_t = start_time
        self.last_odometry: Optional[Odometry] = None
        self.degenerate_scans = 0

    def _advance(self, t: float, odo: Odometry) -> None:
        dt = t - self.last_predict_t
        if dt > 0:
            self.particles = predict(self.particles, odo, self.geom, dt, self.config)
            self.last_predict_t = t

    def step(self, frame: SensorFrame) -> Optional[PfEstimate]:
        if frame.t < self.last_t:
            raise TimeOrderError(frame.t, self.last_t)
        self.last_t = frame.t
        if isinstance(frame.payload, Odometry):
            self._advance(frame.t, frame.payload)
            self.last_odometry = frame.payload
            return None
        if self.last_odometry is not None:
            self._advance(frame.t, self.last_odometry)
        return self._correct(frame.t, frame.payload)

    def _correct(self, t: float, scan: LrfScan) -> PfEstimate:
        cfg = self.config
        if not scan.detections:
            pose = estimate(self.particles, cfg.arithmetic_heading_mean)
            return PfEstimate(t, pose, 0, False)

        weighed, degenerate = weigh(
            self.particles, scan, self.map, cfg.gate,
            d=self.geom.d, distance_scale=cfg.distance_scale,
            unmatched_penalty=cfg.unmatched_penalty,
        )
        pose = estimate(weighed, cfg.arithmetic_heading_mean)
        sensor = rotation_center_to_sensor(pose, self.geom.d)
        n_matched = associate(scan.detections, sensor, self.map, cfg.gate).n_matched
        if degenerate:
            self.degenerate_scans += 1
            log.warning("t=%.2f: every particle scored zero, correction skipped", t)
            self.particles = weighed
        else:
            log.debug("t=%.2f: ess=%.1f", t, effective_sample_size(weighed))
            self.particles = redistribute(weighed, self.map, cfg)
        return PfEstimate(t, pose, n_matched, degenerate)
