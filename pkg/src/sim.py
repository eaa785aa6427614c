"""
sim.py – Ground-truth trajectories and simulated sensor streams.

Truth follows the exact constant-twist arc, while the particle filter
predicts with the first-order step from kinematics.py; the gap between the
two is model error the filter has to absorb.

Every random draw comes from one ``numpy.random.Generator`` seeded per run.
Draw order is fixed: at each timestamp the odometry frame draws first
(left encoder, right encoder, gyro), then the LRF scan (per reflector in map
order: detection coin, then range and bearing noise when detected; then the
clutter count and two coordinates per clutter point, drawn even when the
point then falls out of range).
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from config import NoiseModel, SensorTiming, TrajectorySpec, VehicleGeometry
from kinematics import (
    BodyTwist,
    DriveCommand,
    chord_twist,
    drive_to_twist,
    integrate_arc,
    rotation_center_to_sensor,
    twist_to_encoders,
)
from logger import get_logger
from world import Pose2D, ReflectorDetection, ReflectorMap, observe

log = get_logger("sim")

TICK_TOLERANCE = 1e-9


class TruthSample(NamedTuple):
    t: float
    pose: Pose2D


@dataclass(frozen=True)
class Odometry:
    """Auxiliary-wheel rates and gyro rate, rad/s."""

    w_l: float
    w_r: float
    gyro_w: float


@dataclass(frozen=True)
class LrfScan:
    detections: Tuple[ReflectorDetection, ...]

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class SensorFrame:
    t: float
    payload: Union[Odometry, LrfScan]

    @property
    def is_odometry(self) -> bool:
        return isinstance(self.payload, Odometry)


def generate_truth(spec: TrajectorySpec, geom: VehicleGeometry, tick: float) -> List[TruthSample]:
    """Sample the rotation-center pose every *tick* seconds, starting at
    t = 0 with ``spec.initial_pose``."""
    if not tick > 0:
        raise ValueError(f"tick must be > 0, got {tick!r}")
    steps = []
    for i, seg in enumerate(spec.segments):
        n = int(round(seg.duration / tick))
        if n < 1 or abs(n * tick - seg.duration) > TICK_TOLERANCE:
            raise ValueError(f"tick {tick!r} does not divide segment {i} duration {seg.duration!r}")
        steps.append((n, drive_to_twist(DriveCommand(seg.v_d, seg.delta), geom)))

    pose = spec.initial_pose
    samples = [TruthSample(0.0, pose)]
    k = 0
    for n, twist in steps:
        for _ in range(n):
            k += 1
            pose = integrate_arc(pose, twist, tick)
            samples.append(TruthSample(k * tick, pose))
    log.debug("generated %d truth samples over %.2f s", len(samples), k * tick)
    return samples


def _tick_twists(truth: Sequence[TruthSample], tick: float) -> List[BodyTwist]:
    """Twist over each truth interval; entry i covers (t[i], t[i+1])."""
    return [chord_twist(a.pose, b.pose, tick) for a, b in zip(truth, truth[1:])]


def simulate_scan(
    sensor_pose: Pose2D,
    reflector_map: ReflectorMap,
    noise: NoiseModel,
    rng: np.random.Generator,
    turn_rate: float = 0.0,
) -> LrfScan:
    """One LRF scan from *sensor_pose*.  Bearing noise grows with the
    absolute turn rate to stand in for the rotating-header smear.
    Detections are reported in scan order (ascending bearing)."""
    bearing_sigma = noise.lrf_bearing_stddev + noise.bearing_smear_gain * abs(turn_rate)
    detections: List[ReflectorDetection] = []
    for ref in reflector_map.reflectors:
        truth = observe(sensor_pose, ref.x, ref.y)
        if truth.range > noise.max_lrf_range:
            continue
        if not rng.random() < noise.detection_prob:
            continue
        r = truth.range + rng.normal(0.0, noise.lrf_range_stddev)
        b = truth.bearing + rng.normal(0.0, bearing_sigma)
        detections.append(ReflectorDetection(max(r, 0.0), b))

    bounds = reflector_map.bounds
    for _ in range(int(rng.poisson(noise.clutter_rate))):
        x = rng.uniform(bounds.xmin, bounds.xmax)
        y = rng.uniform(bounds.ymin, bounds.ymax)
        det = observe(sensor_pose, x, y)
        if det.range > noise.max_lrf_range:
            continue
        detections.append(det)

    detections.sort(key=lambda det: det.bearing)
    return LrfScan(tuple(detections))


class _EncoderCounter:
    """Integrates a wheel rate into whole encoder pulses."""

    def __init__(self, pulses: int):
        self.step = 2.0 * math.pi / pulses
        self.angle = 0.0
        self.count = 0

    def rate(self, true_rate: float, period: float) -> float:
        self.angle += true_rate * period
        count = math.floor(self.angle / self.step)
        delta = count - self.count
        self.count = count
        return delta * self.step / period


def simulate_sensors(
    truth: Sequence[TruthSample],
    reflector_map: ReflectorMap,
    geom: VehicleGeometry,
    noise: NoiseModel,
    seed: int,
    timing: Optional[SensorTiming] = None,
) -> List[SensorFrame]:
    """Simulate the odometry and LRF streams for *truth*.

    Odometry frames carry the mean twist of the preceding period converted to
    wheel rates, plus noise; LRF scans are snapshots at their timestamp from
    the sensor pose *d* meters ahead of the rotation center.
    """
    if not truth:
        raise ValueError("truth must not be empty")
    timing = timing or SensorTiming()
    tick = timing.tick
    for a, b in zip(truth, truth[1:]):
        if abs((b.t - a.t) - tick) > TICK_TOLERANCE:
            raise ValueError(f"truth spacing at t={a.t!r} differs from tick {tick!r}")

    rng = np.random.default_rng(seed)
    twists = _tick_twists(truth, tick)
    odo_every = timing.ticks(timing.odometry_period)
    lrf_every = timing.ticks(timing.lrf_period)
    counters = None
    if noise.encoder_pulses > 0:
        counters = (_EncoderCounter(noise.encoder_pulses), _EncoderCounter(noise.encoder_pulses))

    frames: List[SensorFrame] = []
    for i, sample in enumerate(truth):
        if i > 0 and i % odo_every == 0:
            window = twists[i - odo_every:i]
            mean = BodyTwist(
                sum(tw.v for tw in window) / len(window),
                sum(tw.w for tw in window) / len(window),
            )
            w_l, w_r = twist_to_encoders(mean, geom)
            w_l += rng.normal(0.0, noise.encoder_rate_stddev)
            w_r += rng.normal(0.0, noise.encoder_rate_stddev)
            if counters is not None:
                w_l = counters[0].rate(w_l, timing.odometry_period)
                w_r = counters[1].rate(w_r, timing.odometry_period)
            gyro = mean.w + noise.gyro_bias + rng.normal(0.0, noise.gyro_rate_stddev)
            gyro = min(max(gyro, -noise.gyro_range), noise.gyro_range)
            frames.append(SensorFrame(sample.t, Odometry(w_l, w_r, gyro)))
        if i % lrf_every == 0:
            turn_rate = twists[i - 1].w if i > 0 else (twists[0].w if twists else 0.0)
            sensor_pose = rotation_center_to_sensor(sample.pose, geom.d)
            scan = simulate_scan(sensor_pose, reflector_map, noise, rng, turn_rate)
            frames.append(SensorFrame(sample.t, scan))

    log.debug("simulated %d frames (seed %d)", len(frames), seed)
    return frames
