"""
kinematics.py – Kinematic model of the axle-drive forklift LGV.

  * drive-unit relation: drive speed + steering angle → body twist
  * auxiliary-wheel encoders → body twist, and the inverse used by the simulator
  * first-order pose update (the filter's prediction model)
  * exact constant-twist arc (the simulator's ground truth)
  * LRF mount ↔ target rotation center conversion

A doubled wheel-rim speed and an arctangent turn-rate form are available as
alternatives behind the ``doubled_rim_speed`` / ``arctan_turn_rate`` flags of :class:`VehicleGeometry`.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from config import VehicleGeometry
from world import Pose2D, normalize_angle, normalize_angles

ArrayOrFloat = Union[float, np.ndarray]


@dataclass(frozen=True)
class BodyTwist:
    """Linear (m/s) and angular (rad/s) speed of the target rotation center."""

    v: float
    w: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.w)):
            raise ValueError(f"twist must be finite, got ({self.v!r}, {self.w!r})")


@dataclass(frozen=True)
class DriveCommand:
    v_d: float
    delta: float

    def __post_init__(self):
        if not abs(self.delta) < math.pi / 2:
            raise ValueError(f"steering angle must satisfy |delta| < pi/2, got {self.delta!r}")


def drive_to_twist(cmd: DriveCommand, geom: VehicleGeometry) -> BodyTwist:
    """Body twist produced by the drive wheel.  The turn rate takes the sign
    of the steering angle (left steer turns counter-clockwise)."""
    v = cmd.v_d * math.cos(cmd.delta)
    if cmd.delta == 0:
        return BodyTwist(v, 0.0)
    return BodyTwist(v, math.copysign(cmd.v_d / geom.h, cmd.delta))


def _rim_factor(geom: VehicleGeometry) -> float:
    return 2.0 if geom.doubled_rim_speed else 1.0


def encoders_to_twist(w_l: float, w_r: float, geom: VehicleGeometry) -> BodyTwist:
    """Body twist from the two auxiliary-wheel rates (rad/s)."""
    factor = _rim_factor(geom)
    v_l = w_l * factor * geom.r_l
    v_r = w_r * factor * geom.r_r
    v = (v_r + v_l) / 2.0
    if geom.arctan_turn_rate:
        w = math.atan((v_r - v_l) / geom.l)
    else:
        w = (v_r - v_l) / geom.l
    return BodyTwist(v, w)


def twist_to_encoders(twist: BodyTwist, geom: VehicleGeometry) -> Tuple[float, float]:
    """Wheel rates (w_l, w_r) that :func:`encoders_to_twist` maps back to *twist*."""
    if geom.arctan_turn_rate:
        spread = geom.l * math.tan(twist.w)
    else:
        spread = geom.l * twist.w
    v_l = twist.v - spread / 2.0
    v_r = twist.v + spread / 2.0
    factor = _rim_factor(geom)
    return v_l / (factor * geom.r_l), v_r / (factor * geom.r_r)


def integrate_pose(p: Pose2D, twist: BodyTwist, dt: float) -> Pose2D:
    """One prediction step: the heading increment is applied first and the
    translation follows the new heading."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    v_t = twist.v * dt
    heading = p.theta + twist.w * dt
    return Pose2D(p.x + v_t * math.cos(heading), p.y + v_t * math.sin(heading), heading)


def integrate_poses(poses: np.ndarray, v: ArrayOrFloat, w: ArrayOrFloat, dt: float) -> np.ndarray:
    """:func:`integrate_pose` over an (n, 3) array; *v* and *w* may be
    scalars or per-row arrays.  Returns a new array."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    heading = poses[:, 2] + np.asarray(w) * dt
    v_t = np.asarray(v) * dt
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + v_t * np.cos(heading)
    out[:, 1] = poses[:, 1] + v_t * np.sin(heading)
    out[:, 2] = normalize_angles(heading)
    return out


def integrate_arc(p: Pose2D, twist: BodyTwist, dt: float) -> Pose2D:
    """Exact motion under a twist held constant for *dt* seconds."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    dtheta = twist.w * dt
    if twist.w == 0:
        return Pose2D(p.x + twist.v * dt * math.cos(p.theta),
                      p.y + twist.v * dt * math.sin(p.theta), p.theta)
    radius = twist.v / twist.w
    return Pose2D(
        p.x + radius * (math.sin(p.theta + dtheta) - math.sin(p.theta)),
        p.y - radius * (math.cos(p.theta + dtheta) - math.cos(p.theta)),
        p.theta + dtheta,
    )


def chord_twist(p0: Pose2D, p1: Pose2D, dt: float) -> BodyTwist:
    """Constant twist that carries *p0* to *p1* along an arc in *dt* seconds
    (the inverse of :func:`integrate_arc` for turns under half a revolution)."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    dtheta = normalize_angle(p1.theta - p0.theta)
    dx = p1.x - p0.x
    dy = p1.y - p0.y
    chord = math.hypot(dx, dy)
    mid = p0.theta + dtheta / 2.0
    if dx * math.cos(mid) + dy * math.sin(mid) < 0:
        chord = -chord
    if abs(dtheta) < 1e-12:
        arc = chord
    else:
        arc = chord * (dtheta / 2.0) / math.sin(dtheta / 2.0)
    return BodyTwist(arc / dt, dtheta / dt)


def sensor_to_rotation_center(sensor_pose: Pose2D, d: float) -> Pose2D:
    """Convert an LRF pose to the target rotation center, the LRF being
    mounted *d* meters ahead along the heading."""
    if d < 0:
        raise ValueError(f"sensor offset must be >= 0, got {d!r}")
    return Pose2D(
        sensor_pose.x - d * math.cos(sensor_pose.theta),
        sensor_pose.y - d * math.sin(sensor_pose.theta),
        sensor_pose.theta,
    )


def rotation_center_to_sensor(center_pose: Pose2D, d: float) -> Pose2D:
    """Inverse of :func:`sensor_to_rotation_center`."""
    if d < 0:
        raise ValueError(f"sensor offset must be >= 0, got {d!r}")
    return Pose2D(
        center_pose.x + d * math.cos(center_pose.theta),
        center_pose.y + d * math.sin(center_pose.theta),
        center_pose.theta,
    )


def sensor_origins(poses: np.ndarray, d: float) -> np.ndarray:
    """LRF poses for an (n, 3) array of rotation-center poses."""
    out = poses.copy()
    out[:, 0] += d * np.cos(poses[:, 2])
    out[:, 1] += d * np.sin(poses[:, 2])
    return out
