"""
world.py – Geometric types and frame helpers shared by every other module.

  * Pose2D / Reflector / ReflectorMap / ReflectorDetection value types
  * angle normalization into (−π, π]
  * detection ↔ world-point conversions (scalar and vectorized)

Units are SI throughout.  The world frame is right-handed with headings
measured counter-clockwise from +x.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from error_handling import ConfigError

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap *a* into (−π, π]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Array form of :func:`normalize_angle`."""
    r = np.remainder(a + math.pi, TWO_PI) - math.pi
    return np.where(r <= -math.pi, r + TWO_PI, r)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose.  ``theta`` is normalized on construction."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got ({self.x!r}, {self.y!r})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class Bounds(NamedTuple):
    """Axis-aligned working-environment rectangle, meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin


@dataclass(frozen=True)
class Reflector:
    id: int
    x: float
    y: float

    def __post_init__(self):
        if self.id < 0:
            raise ConfigError(f"reflector id must be >= 0, got {self.id}", "map.reflectors.id")


@dataclass(frozen=True)
class ReflectorDetection:
    """One LRF return, polar in the sensor frame."""

    range: float
    bearing: float

    def __post_init__(self):
        if not math.isfinite(self.range) or self.range < 0:
            raise ValueError(f"detection range must be finite and >= 0, got {self.range!r}")
        object.__setattr__(self, "range", float(self.range))
        object.__setattr__(self, "bearing", normalize_angle(float(self.bearing)))


@dataclass(frozen=True)
class ReflectorMap:
    """Surveyed reflector positions plus the working-environment bounds.

    ``positions`` is an (n, 2) array in the order of ``reflectors`` and
    ``ids`` the matching id array; both are derived on construction.
    """

    reflectors: Tuple[Reflector, ...]
    bounds: Bounds
    positions: np.ndarray = field(init=False, repr=False, compare=False)
    ids: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        reflectors = tuple(self.reflectors)
        bounds = Bounds(*(float(v) for v in self.bounds))
        if not reflectors:
            raise ConfigError("reflector map needs at least one reflector", "map.reflectors")
        if bounds.xmax <= bounds.xmin or bounds.ymax <= bounds.ymin:
            raise ConfigError(f"degenerate map bounds {tuple(bounds)}", "map.bounds")
        seen = set()
        for ref in reflectors:
            if ref.id in seen:
                raise ConfigError(f"duplicate reflector id {ref.id}", "map.reflectors")
            seen.add(ref.id)
            if not bounds.contains(ref.x, ref.y):
                raise ConfigError(
                    f"reflector {ref.id} at ({ref.x}, {ref.y}) lies outside the map bounds",
                    "map.reflectors",
                )
        object.__setattr__(self, "reflectors", reflectors)
        object.__setattr__(self, "bounds", bounds)
        positions = np.array([[r.x, r.y] for r in reflectors], dtype=float)
        positions.setflags(write=False)
        ids = np.array([r.id for r in reflectors], dtype=int)
        ids.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.reflectors)

    def by_id(self, reflector_id: int) -> Reflector:
        for ref in self.reflectors:
            if ref.id == reflector_id:
                return ref
        raise KeyError(reflector_id)

    def index_of(self, reflector_id: int) -> int:
        """Row of *reflector_id* in ``positions``."""
        hits = np.flatnonzero(self.ids == reflector_id)
        if hits.size == 0:
            raise KeyError(reflector_id)
        return int(hits[0])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReflectorMap":
        """Build a map from ``{"bounds": [xmin, ymin, xmax, ymax],
        "reflectors": [{"id": 0, "x": .., "y": ..}, ..]}``."""
        try:
            bounds = Bounds(*(float(v) for v in data["bounds"]))
        except KeyError:
            raise ConfigError("missing field map.bounds", "map.bounds") from None
        except TypeError:
            raise ConfigError("map.bounds must be [xmin, ymin, xmax, ymax]", "map.bounds") from None
        if "reflectors" not in data:
            raise ConfigError("missing field map.reflectors", "map.reflectors")
        reflectors: List[Reflector] = []
        for i, item in enumerate(data["reflectors"]):
            try:
                reflectors.append(Reflector(int(item["id"]), float(item["x"]), float(item["y"])))
            except KeyError as exc:
                raise ConfigError(
                    f"missing field map.reflectors[{i}].{exc.args[0]}", "map.reflectors"
                ) from None
        return cls(tuple(reflectors), bounds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bounds": list(self.bounds),
            "reflectors": [{"id": r.id, "x": r.x, "y": r.y} for r in self.reflectors],
        }


# ── Frame conversions ────────────────────────────────────────────────────────

def transform_detection_to_world(pose: Pose2D, det: ReflectorDetection) -> Tuple[float, float]:
    """Project a detection taken from *pose* (the LRF origin) into the world."""
    heading = pose.theta + det.bearing
    return (pose.x + det.range * math.cos(heading), pose.y + det.range * math.sin(heading))


def observe(sensor_pose: Pose2D, x: float, y: float) -> ReflectorDetection:
    """Inverse of :func:`transform_detection_to_world`: the detection a
    noiseless LRF at *sensor_pose* reports for the world point (*x*, *y*)."""
    dx = x - sensor_pose.x
    dy = y - sensor_pose.y
    return ReflectorDetection(math.hypot(dx, dy), math.atan2(dy, dx) - sensor_pose.theta)


def detections_to_arrays(detections: Sequence[ReflectorDetection]) -> Tuple[np.ndarray, np.ndarray]:
    """Split detections into (ranges, bearings) arrays."""
    ranges = np.fromiter((d.range for d in detections), dtype=float, count=len(detections))
    bearings = np.fromiter((d.bearing for d in detections), dtype=float, count=len(detections))
    return ranges, bearings


def project_detections(
    origins: np.ndarray, ranges: np.ndarray, bearings: np.ndarray
) -> np.ndarray:
    """Project every detection from every origin.

    *origins* is (m, 3) of LRF poses; returns (m, n, 2) world points.
    """
    origins = np.atleast_2d(origins)
    heading = origins[:, 2:3] + bearings[None, :]
    px = origins[:, 0:1] + ranges[None, :] * np.cos(heading)
    py = origins[:, 1:2] + ranges[None, :] * np.sin(heading)
    return np.stack([px, py], axis=-1)
