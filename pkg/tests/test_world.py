"""
Tests for world geometry
"""

import math
import sys
import os

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from error_handling import ConfigError
from world import (
    Bounds,
    Pose2D,
    Reflector,
    ReflectorDetection,
    ReflectorMap,
    normalize_angle,
    normalize_angles,
    observe,
    project_detections,
    transform_detection_to_world,
)


# ---------------------------------------------------------------------------
# normalize_angle
# ---------------------------------------------------------------------------

def test_normalize_angle_identity():
    """Angles already in range are unchanged"""
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(1.0) == pytest.approx(1.0)


def test_normalize_angle_periodicity():
    """3π wraps to π and −3π/2 to π/2"""
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-1.5 * math.pi) == pytest.approx(math.pi / 2)


def test_normalize_angle_minus_pi_maps_to_pi():
    """The range is half-open, (−π, π]"""
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(math.pi) == pytest.approx(math.pi)


def test_normalize_angle_rejects_non_finite():
    """NaN and infinities are rejected"""
    for bad in (float("nan"), float("inf"), -float("inf")):
        with pytest.raises(ValueError):
            normalize_angle(bad)


def test_normalize_angles_matches_scalar():
    """The array form agrees with the scalar form"""
    rng = np.random.default_rng(3)
    a = rng.uniform(-20, 20, 500)
    out = normalize_angles(a)
    assert np.all(out > -math.pi) and np.all(out <= math.pi)
    for x, y in zip(a, out):
        assert y == pytest.approx(normalize_angle(float(x)), abs=1e-12)


# ---------------------------------------------------------------------------
# Pose2D / ReflectorDetection
# ---------------------------------------------------------------------------

def test_pose_normalizes_heading():
    """Pose headings are wrapped on construction"""
    assert Pose2D(0, 0, 2 * math.pi + 0.5).theta == pytest.approx(0.5)


def test_pose_rejects_non_finite_position():
    """Poses must have finite coordinates"""
    with pytest.raises(ValueError):
        Pose2D(float("nan"), 0.0)


def test_detection_rejects_negative_range():
    """Ranges are non-negative"""
    with pytest.raises(ValueError):
        ReflectorDetection(-0.1, 0.0)


# ---------------------------------------------------------------------------
# transform_detection_to_world
# ---------------------------------------------------------------------------

def test_transform_identity_frame():
    """Range 1 straight ahead from the origin lands on (1, 0)"""
    x, y = transform_detection_to_world(Pose2D(0, 0, 0), ReflectorDetection(1, 0))
    assert (x, y) == pytest.approx((1.0, 0.0))


def test_transform_quarter_turn():
    """Facing +y, straight ahead lands on (0, 1)"""
    x, y = transform_detection_to_world(Pose2D(0, 0, math.pi / 2), ReflectorDetection(1, 0))
    assert x == pytest.approx(0.0, abs=1e-15)
    assert y == pytest.approx(1.0)


def test_transform_hand_example():
    """(2, 3, π/6) with range 2, bearing π/6 lands on (3, 3 + √3)"""
    x, y = transform_detection_to_world(Pose2D(2, 3, math.pi / 6), ReflectorDetection(2, math.pi / 6))
    assert x == pytest.approx(3.0, abs=1e-12)
    assert y == pytest.approx(3.0 + math.sqrt(3.0), abs=1e-12)


def test_observe_inverts_transform():
    """observe() is the inverse of transform_detection_to_world"""
    pose = Pose2D(1.5, -2.0, 2.8)
    det = observe(pose, 7.0, 4.0)
    x, y = transform_detection_to_world(pose, det)
    assert (x, y) == pytest.approx((7.0, 4.0), abs=1e-12)


def test_project_detections_matches_scalar():
    """Vectorized projection agrees with the scalar transform"""
    origins = np.array([[0.0, 0.0, 0.3], [2.0, -1.0, -2.5]])
    dets = [ReflectorDetection(3.0, 0.1), ReflectorDetection(1.0, -1.2)]
    ranges = np.array([d.range for d in dets])
    bearings = np.array([d.bearing for d in dets])
    points = project_detections(origins, ranges, bearings)
    assert points.shape == (2, 2, 2)
    for i, o in enumerate(origins):
        for j, det in enumerate(dets):
            expected = transform_detection_to_world(Pose2D(*o), det)
            assert tuple(points[i, j]) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# ReflectorMap
# ---------------------------------------------------------------------------

def test_map_positions_and_ids():
    """Derived arrays follow reflector order"""
    m = ReflectorMap((Reflector(4, 1.0, 2.0), Reflector(9, 3.0, 0.0)), Bounds(0, 0, 5, 5))
    assert m.positions.tolist() == [[1.0, 2.0], [3.0, 0.0]]
    assert m.ids.tolist() == [4, 9]
    assert m.index_of(9) == 1
    assert m.by_id(4).x == 1.0
    assert len(m) == 2


def test_map_rejects_duplicate_ids():
    """Reflector ids are unique"""
    with pytest.raises(ConfigError):
        ReflectorMap((Reflector(1, 1, 1), Reflector(1, 2, 2)), Bounds(0, 0, 5, 5))


def test_map_rejects_reflector_outside_bounds():
    """Every reflector lies within the bounds"""
    with pytest.raises(ConfigError):
        ReflectorMap((Reflector(0, 6, 1),), Bounds(0, 0, 5, 5))


def test_map_accepts_reflector_on_boundary():
    """Reflectors on the wall are inside"""
    m = ReflectorMap((Reflector(0, 5, 0),), Bounds(0, 0, 5, 5))
    assert len(m) == 1


def test_map_rejects_empty():
    """A map needs at least one reflector"""
    with pytest.raises(ConfigError):
        ReflectorMap((), Bounds(0, 0, 5, 5))


def test_map_dict_round_trip():
    """to_dict / from_dict preserve the map"""
    m = ReflectorMap((Reflector(0, 1.0, 2.0), Reflector(1, 3.5, 4.0)), Bounds(0, 0, 10, 8))
    again = ReflectorMap.from_dict(m.to_dict())
    assert again == m


def test_map_from_dict_missing_bounds():
    """Missing bounds are reported by field"""
    with pytest.raises(ConfigError, match="map.bounds"):
        ReflectorMap.from_dict({"reflectors": [{"id": 0, "x": 0, "y": 0}]})
