"""
Tests for the laser-only navigation baseline
"""

import itertools
import math
import sys
import os

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from config import VehicleGeometry
from error_handling import InsufficientMatches
from kinematics import BodyTwist, integrate_arc, rotation_center_to_sensor
from lasernav import Association, LaserNavigator, associate, greedy_match, register_points, solve_fix
from sim import LrfScan
from world import Bounds, Pose2D, Reflector, ReflectorMap, observe


def three_reflectors():
    return ReflectorMap(
        (Reflector(1, 8.0, 1.0), Reflector(2, 2.0, 9.0), Reflector(3, 9.0, 8.0)),
        Bounds(0, 0, 10, 10),
    )


def seen_from(sensor, rmap):
    return [observe(sensor, r.x, r.y) for r in rmap.reflectors]


# ---------------------------------------------------------------------------
# greedy_match / associate
# ---------------------------------------------------------------------------

def test_associate_empty():
    """No detections, no pairs"""
    a = associate([], Pose2D(0, 0), three_reflectors(), 0.5)
    assert a.pairs == () and a.unmatched_detections == ()


def test_associate_noiseless():
    """Noiseless detections pair with the reflectors they came from"""
    rmap = three_reflectors()
    sensor = Pose2D(4, 4, 0.3)
    a = associate(seen_from(sensor, rmap), sensor, rmap, 0.5)
    assert a.pairs == ((0, 1), (1, 2), (2, 3))
    assert a.n_matched == 3


def test_associate_closest_claims_reflector():
    """Two detections near one reflector: the closer one wins it"""
    rmap = ReflectorMap((Reflector(7, 5.0, 0.0), Reflector(8, 5.0, 3.0)), Bounds(0, -1, 10, 4))
    sensor = Pose2D(0, 0, 0)
    dets = [observe(sensor, 5.3, 0.0), observe(sensor, 5.1, 0.0)]
    a = associate(dets, sensor, rmap, 0.5)
    assert a.pairs == ((1, 7),)
    assert a.unmatched_detections == (0,)


def test_associate_gate():
    """Detections beyond the gate stay unmatched"""
    rmap = three_reflectors()
    sensor = Pose2D(4, 4, 0.0)
    a = associate(seen_from(sensor, rmap), Pose2D(4, 5, 0.0), rmap, 0.5)
    assert a.n_matched == 0
    assert a.unmatched_detections == (0, 1, 2)


def test_associate_rejects_bad_gate():
    """The gate must be positive"""
    with pytest.raises(ValueError):
        associate([], Pose2D(0, 0), three_reflectors(), 0.0)


def test_greedy_match_minimizes_total_in_small_case():
    """On a small matrix greedy agrees with brute force"""
    dist = np.array([[0.1, 0.4], [0.3, 0.45]])
    got = greedy_match(dist, 0.5)
    assert sorted((r, c) for r, c, _ in got) == [(0, 0), (1, 1)]
    best = min(itertools.permutations(range(2)), key=lambda p: sum(dist[i, p[i]] for i in range(2)))
    assert sorted((r, c) for r, c, _ in got) == [(i, best[i]) for i in range(2)]


def test_greedy_match_one_to_one():
    """No row or column is used twice"""
    rng = np.random.default_rng(4)
    dist = rng.uniform(0, 1, (8, 6))
    got = greedy_match(dist, 0.7)
    rows = [r for r, _, _ in got]
    cols = [c for _, c, _ in got]
    assert len(set(rows)) == len(rows)
    assert len(set(cols)) == len(cols)
    assert all(d <= 0.7 for _, _, d in got)


# ---------------------------------------------------------------------------
# register_points / solve_fix
# ---------------------------------------------------------------------------

def test_register_points_exact():
    """A known rigid motion is recovered exactly"""
    rng = np.random.default_rng(8)
    src = rng.uniform(-5, 5, (6, 2))
    theta = 2.4
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    t = np.array([3.0, -1.5])
    got_theta, got_t = register_points(src, src @ R.T + t)
    assert math.remainder(got_theta - theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)
    assert got_t == pytest.approx(t, abs=1e-9)


def test_solve_fix_exact_without_offset():
    """Noiseless detections give the true sensor pose and zero residual"""
    rmap = three_reflectors()
    sensor = Pose2D(4.2, 3.7, -0.8)
    dets = seen_from(sensor, rmap)
    fix = solve_fix(dets, associate(dets, sensor, rmap, 0.5), rmap, VehicleGeometry(d=0.0), sensor)
    assert fix.pose.x == pytest.approx(sensor.x, abs=1e-7)
    assert fix.pose.y == pytest.approx(sensor.y, abs=1e-7)
    assert fix.pose.theta == pytest.approx(sensor.theta, abs=1e-7)
    assert fix.residual_rms == pytest.approx(0.0, abs=1e-7)


def test_solve_fix_applies_offset():
    """With d = 1.2 the fix is moved back along the heading"""
    rmap = three_reflectors()
    center = Pose2D(4.0, 4.0, 0.6)
    sensor = rotation_center_to_sensor(center, 1.2)
    dets = seen_from(sensor, rmap)
    fix = solve_fix(dets, associate(dets, sensor, rmap, 0.5), rmap, VehicleGeometry(d=1.2), sensor)
    assert fix.pose.x == pytest.approx(sensor.x - 1.2 * math.cos(0.6), abs=1e-7)
    assert fix.pose.y == pytest.approx(sensor.y - 1.2 * math.sin(0.6), abs=1e-7)
    assert fix.sensor_pose.distance_to(sensor) < 1e-7


def test_solve_fix_two_reflectors_suffice():
    """Two matched reflectors determine the pose"""
    rmap = ReflectorMap((Reflector(0, 8, 1), Reflector(1, 2, 9)), Bounds(0, 0, 10, 10))
    sensor = Pose2D(5, 5, 1.0)
    dets = seen_from(sensor, rmap)
    fix = solve_fix(dets, associate(dets, sensor, rmap, 0.5), rmap, VehicleGeometry(d=0.0), sensor)
    assert fix.pose.distance_to(sensor) < 1e-7


def test_solve_fix_single_match_raises():
    """One match is underdetermined"""
    rmap = three_reflectors()
    sensor = Pose2D(4, 4, 0)
    dets = seen_from(sensor, rmap)[:1]
    with pytest.raises(InsufficientMatches) as info:
        solve_fix(dets, associate(dets, sensor, rmap, 0.5), rmap, VehicleGeometry(), sensor)
    assert info.value.n_matched == 1


def test_residual_invariant_under_rigid_motion():
    """Moving map and vehicle together leaves the residual unchanged"""
    rmap = three_reflectors()
    sensor = Pose2D(4, 4, 0.2)
    dets = [observe(sensor, r.x + dx, r.y + dy) for r, (dx, dy) in
            zip(rmap.reflectors, [(0.02, -0.01), (-0.03, 0.0), (0.01, 0.02)])]
    fix_a = solve_fix(dets, associate(dets, sensor, rmap, 0.5), rmap, VehicleGeometry(d=0), sensor)

    c, s = math.cos(1.1), math.sin(1.1)
    moved = ReflectorMap(
        tuple(Reflector(r.id, 50 + c * r.x - s * r.y, 50 + s * r.x + c * r.y) for r in rmap.reflectors),
        Bounds(0, 0, 100, 100),
    )
    moved_sensor = Pose2D(50 + c * 4 - s * 4, 50 + s * 4 + c * 4, 0.2 + 1.1)
    fix_b = solve_fix(dets, associate(dets, moved_sensor, moved, 0.5), moved,
                      VehicleGeometry(d=0), moved_sensor)
    assert fix_b.residual_rms == pytest.approx(fix_a.residual_rms, abs=1e-9)
    assert fix_a.residual_rms > 0


# ---------------------------------------------------------------------------
# LaserNavigator
# ---------------------------------------------------------------------------

def test_navigator_tracks_and_counts_failures():
    """The navigator threads its prior and reports missing fixes as None"""
    rmap = three_reflectors()
    g = VehicleGeometry(d=1.0)
    center = Pose2D(4, 4, 0.5)
    nav = LaserNavigator(rmap, g, center, gate=0.5)
    sensor = rotation_center_to_sensor(center, g.d)
    fix = nav.update(0.0, LrfScan(tuple(seen_from(sensor, rmap))))
    assert fix is not None and fix.pose.distance_to(center) < 1e-7
    assert nav.update(0.45, LrfScan(())) is None
    assert nav.failures == 1


def test_association_type_counts_pairs():
    """n_matched is the number of pairs"""
    assert Association(((0, 3), (2, 5)), (1,)).n_matched == 2


def test_navigator_recovers_turn_and_extrapolates():
    """A fast turn between scans is found by the heading search, then
    followed by extrapolating the last two fixes"""
    rmap = three_reflectors()
    g = VehicleGeometry(d=1.0)
    twist = BodyTwist(0.4, 0.5)
    poses = [Pose2D(4, 4, 0.5)]
    for _ in range(2):
        poses.append(integrate_arc(poses[-1], twist, 0.45))
    nav = LaserNavigator(rmap, g, poses[0], gate=0.5)

    for k, center in enumerate(poses[:2]):
        scan = LrfScan(tuple(seen_from(rotation_center_to_sensor(center, g.d), rmap)))
        fix = nav.update(0.45 * k, scan)
        assert fix is not None and fix.pose.distance_to(center) < 1e-7
    assert nav.searches == 1

    expected = rotation_center_to_sensor(poses[2], g.d)
    predicted = nav.predicted_prior(0.9)
    assert predicted.distance_to(expected) < 1e-7
    assert predicted.theta == pytest.approx(expected.theta, abs=1e-7)

    fix = nav.update(0.9, LrfScan(tuple(seen_from(expected, rmap))))
    assert fix is not None and fix.pose.distance_to(poses[2]) < 1e-7
    assert nav.searches == 1


def test_navigator_without_extrapolation_keeps_last_fix():
    """With extrapolation off the prior is the last fix itself"""
    rmap = three_reflectors()
    g = VehicleGeometry(d=1.0)
    center = Pose2D(4, 4, 0.5)
    nav = LaserNavigator(rmap, g, center, gate=0.5, extrapolate=False)
    scan = LrfScan(tuple(seen_from(rotation_center_to_sensor(center, g.d), rmap)))
    nav.update(0.0, scan)
    nav.update(0.45, scan)
    assert nav.predicted_prior(0.9) == nav.prior


def test_required_matches_scale_with_scan_size():
    """The search threshold is a share of the detections, never below two"""
    nav = LaserNavigator(three_reflectors(), VehicleGeometry(), Pose2D(4, 4, 0), gate=0.5)
    assert nav.required_matches(0) == 2
    assert nav.required_matches(3) == 2
    assert nav.required_matches(20) == 10
    assert nav.required_matches(21) == 11


def test_search_prefers_closer_matches_on_equal_count():
    """A search triggered by an unmatched return keeps the exact prior"""
    rmap = three_reflectors()
    g = VehicleGeometry(d=1.0)
    center = Pose2D(4, 4, 0.5)
    sensor = rotation_center_to_sensor(center, g.d)
    dets = seen_from(sensor, rmap) + [observe(sensor, 5.0, 5.0)]
    nav = LaserNavigator(rmap, g, center, gate=0.5, min_match_fraction=1.0)
    fix = nav.update(0.0, LrfScan(tuple(dets)))
    assert nav.searches == 1
    assert fix is not None and fix.n_matched == 3
    assert fix.pose.distance_to(center) < 1e-7


def test_refine_picks_up_returns_missed_by_the_prior():
    """Matching again from the solved pose recovers a far reflector"""
    rmap = ReflectorMap(
        (Reflector(0, 3.0, 0.0), Reflector(1, 0.0, 3.0), Reflector(2, -3.0, 0.0), Reflector(3, 0.0, -20.0)),
        Bounds(-5, -25, 5, 5),
    )
    g = VehicleGeometry(d=0.0)
    truth = Pose2D(0, 0, 0)
    scan = LrfScan(tuple(seen_from(truth, rmap)))
    skewed = Pose2D(0, 0, 0.03)

    plain = LaserNavigator(rmap, g, skewed, gate=0.5, search_turn=0.0, refine=False)
    fix = plain.update(0.0, scan)
    assert fix is not None and fix.n_matched == 3
    assert fix.pose.distance_to(truth) < 1e-7

    refined = LaserNavigator(rmap, g, skewed, gate=0.5, search_turn=0.0)
    fix = refined.update(0.0, scan)
    assert fix is not None and fix.n_matched == 4
    assert refined.refinements == 1
    assert fix.pose.distance_to(truth) < 1e-7
    assert fix.pose.theta == pytest.approx(0.0, abs=1e-9)


def test_extrapolation_uses_a_longer_baseline():
    """After three fixes the twist spans the oldest to the newest"""
    rmap = three_reflectors()
    g = VehicleGeometry(d=1.0)
    twist = BodyTwist(0.3, 0.2)
    poses = [Pose2D(4, 4, 0.5)]
    for _ in range(3):
        poses.append(integrate_arc(poses[-1], twist, 0.45))
    nav = LaserNavigator(rmap, g, poses[0], gate=0.5)
    for k, center in enumerate(poses[:3]):
        nav.update(0.45 * k, LrfScan(tuple(seen_from(rotation_center_to_sensor(center, g.d), rmap))))
    expected = rotation_center_to_sensor(poses[3], g.d)
    assert nav.predicted_prior(1.35).distance_to(expected) < 1e-7
