"""
lasernav.py – Laser-only navigation baseline.

Stands in for a commercial reflector navigator, whose internal matching is
proprietary: anonymous detections are matched to the surveyed map by
globally greedy gated nearest neighbour, the LRF pose is solved by
closed-form 2D point-set registration, and the result is moved back to the
target rotation center.  Priors come from earlier fixes only; odometry is
never used.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_MIN_MATCH_FRACTION, DEFAULT_SEARCH_STEP, DEFAULT_SEARCH_TURN, VehicleGeometry
from error_handling import InsufficientMatches
from kinematics import (
    BodyTwist,
    chord_twist,
    integrate_arc,
    rotation_center_to_sensor,
    sensor_to_rotation_center,
)
from logger import get_logger
from sim import LrfScan
from world import (
    Pose2D,
    ReflectorDetection,
    ReflectorMap,
    detections_to_arrays,
    project_detections,
)

log = get_logger("lasernav")

TWIST_BASELINE_FIXES = 3     # extrapolation twist spans the oldest to newest of these


@dataclass(frozen=True)
class Association:
    """``pairs`` holds (detection index, reflector id), sorted by detection index."""

    pairs: Tuple[Tuple[int, int], ...]
    unmatched_detections: Tuple[int, ...]

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class LaserFix:
    pose: Pose2D            # rotation center
    sensor_pose: Pose2D     # LRF origin, as registered
    n_matched: int
    residual_rms: float


def greedy_match(distances: np.ndarray, gate: float) -> List[Tuple[int, int, float]]:
    """Globally greedy one-to-one matching on an (n, k) distance matrix.

    Pairs are claimed in ascending distance (ties by row, then column) and
    only while within *gate*.  Returns (row, column, distance) triples.
    """
    rows, cols = np.nonzero(distances <= gate)
    if rows.size == 0:
        return []
    dist = distances[rows, cols]
    order = np.lexsort((cols, rows, dist))
    used_rows = set()
    used_cols = set()
    matches = []
    for idx in order:
        r = int(rows[idx])
        c = int(cols[idx])
        if r in used_rows or c in used_cols:
            continue
        used_rows.add(r)
        used_cols.add(c)
        matches.append((r, c, float(dist[idx])))
    return matches


def _match(
    detections: Sequence[ReflectorDetection],
    prior_sensor_pose: Pose2D,
    reflector_map: ReflectorMap,
    gate: float,
) -> Tuple[Association, float]:
    """Association plus the summed distance of its matched pairs."""
    if not detections:
        return Association((), ()), 0.0
    ranges, bearings = detections_to_arrays(detections)
    points = project_detections(prior_sensor_pose.as_array(), ranges, bearings)[0]
    distances = np.linalg.norm(points[:, None, :] - reflector_map.positions[None, :, :], axis=-1)
    matches = greedy_match(distances, gate)
    pairs = sorted((r, int(reflector_map.ids[c])) for r, c, _ in matches)
    matched = {r for r, _ in pairs}
    unmatched = tuple(i for i in range(len(detections)) if i not in matched)
    return Association(tuple(pairs), unmatched), sum(dist for _, _, dist in matches)


def associate(
    detections: Sequence[ReflectorDetection],
    prior_sensor_pose: Pose2D,
    reflector_map: ReflectorMap,
    gate: float,
) -> Association:
    """Match detections to map reflectors after projecting them from the
    prior LRF pose."""
    if not gate > 0:
        raise ValueError(f"gate must be > 0, got {gate!r}")
    return _match(detections, prior_sensor_pose, reflector_map, gate)[0]


def register_points(source: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Least-squares proper rigid transform taking *source* onto *target*.

    Returns (rotation angle, translation).  The rotation comes from the SVD
    of the cross-covariance, with the reflection case folded back to det +1.
    """
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    H = (source - mu_s).T @ (target - mu_t)
    U, _, Vt = np.linalg.svd(H)
    R = Vt.T @ U.T
    if np.linalg.det(R) < 0:
        Vt[1, :] *= -1
        R = Vt.T @ U.T
    t = mu_t - R @ mu_s
    return math.atan2(R[1, 0], R[0, 0]), t


def solve_fix(
    detections: Sequence[ReflectorDetection],
    assoc: Association,
    reflector_map: ReflectorMap,
    geom: VehicleGeometry,
    prior: Pose2D,
) -> LaserFix:
    """Solve the LRF pose from matched detections and convert it to the
    rotation center.  *prior* is the prior LRF pose; its heading is used
    only when the matched detections coincide and fix no rotation."""
    if assoc.n_matched < 2:
        raise InsufficientMatches(assoc.n_matched)
    idx = [i for i, _ in assoc.pairs]
    ranges, bearings = detections_to_arrays([detections[i] for i in idx])
    source = np.column_stack([ranges * np.cos(bearings), ranges * np.sin(bearings)])
    target = np.array([reflector_map.positions[reflector_map.index_of(rid)] for _, rid in assoc.pairs])

    if np.ptp(source, axis=0).max() < 1e-9:
        theta = prior.theta
        c, s = math.cos(theta), math.sin(theta)
        rotated = source @ np.array([[c, s], [-s, c]])
        t = (target - rotated).mean(axis=0)
    else:
        theta, t = register_points(source, target)
        c, s = math.cos(theta), math.sin(theta)
        rotated = source @ np.array([[c, s], [-s, c]])

    residuals = rotated + t - target
    residual_rms = float(math.sqrt(np.mean(np.sum(residuals ** 2, axis=1))))
    sensor_pose = Pose2D(float(t[0]), float(t[1]), theta)
    return LaserFix(
        pose=sensor_to_rotation_center(sensor_pose, geom.d),
        sensor_pose=sensor_pose,
        n_matched=assoc.n_matched,
        residual_rms=residual_rms,
    )


class LaserNavigator:
    """Threads the prior LRF pose from one fix to the next.

    The prior for a scan is the last fix, advanced by the twist observed
    over the last few fixes when *extrapolate* is set.  If that prior
    matches fewer than ``max(2, ceil(min_match_fraction·n))`` of the n
    detections, headings within ±*search_turn* of it are tried, turning
    about the rotation center.  With *refine* the detections are matched
    again from the solved pose and the fix is solved once more.
    """

    def __init__(self, reflector_map: ReflectorMap, geom: VehicleGeometry,
                 initial_pose: Pose2D, gate: float, extrapolate: bool = True,
                 search_turn: float = DEFAULT_SEARCH_TURN,
                 search_step: float = DEFAULT_SEARCH_STEP,
                 min_match_fraction: float = DEFAULT_MIN_MATCH_FRACTION,
                 refine: bool = True):
        self.map = reflector_map
        self.geom = geom
        self.gate = gate
        self.extrapolate = extrapolate
        self.search_turn = search_turn
        self.search_step = search_step
        self.min_match_fraction = min_match_fraction
        self.refine = refine
        self.prior = rotation_center_to_sensor(initial_pose, geom.d)
        self.failures = 0
        self.searches = 0
        self.refinements = 0
        self._fixes: Deque[Tuple[float, Pose2D]] = deque(maxlen=TWIST_BASELINE_FIXES)
        self._twist: Optional[BodyTwist] = None

    def predicted_prior(self, t: float) -> Pose2D:
        """LRF pose expected at *t* from the fixes so far."""
        if not self._fixes or self._twist is None or not self.extrapolate:
            return self.prior
        t_last, center = self._fixes[-1]
        if t <= t_last:
            return self.prior
        return rotation_center_to_sensor(integrate_arc(center, self._twist, t - t_last), self.geom.d)

    def required_matches(self, n_detections: int) -> int:
        """Matches below which the heading search runs."""
        return max(2, int(math.ceil(self.min_match_fraction * n_detections - 1e-9)))

    def _search(self, detections: Sequence[ReflectorDetection], prior: Pose2D) -> Tuple[Association, Pose2D]:
        """Most matches wins, then the smaller summed match distance, then
        the smaller turn."""
        center = sensor_to_rotation_center(prior, self.geom.d)
        assoc, total = _match(detections, prior, self.map, self.gate)
        best = (assoc, prior)
        best_key = (assoc.n_matched, -total)
        steps = int(math.floor(self.search_turn / self.search_step + 1e-9))
        for k in range(1, steps + 1):
            for sign in (1.0, -1.0):
                turned = Pose2D(center.x, center.y, center.theta + sign * k * self.search_step)
                candidate = rotation_center_to_sensor(turned, self.geom.d)
                assoc, total = _match(detections, candidate, self.map, self.gate)
                key = (assoc.n_matched, -total)
                if key > best_key:
                    best, best_key = (assoc, candidate), key
        return best

    def _refined(self, detections: Sequence[ReflectorDetection], fix: LaserFix,
                 assoc: Association) -> LaserFix:
        again = associate(detections, fix.sensor_pose, self.map, self.gate)
        if again.n_matched < assoc.n_matched or again.pairs == assoc.pairs:
            return fix
        self.refinements += 1
        return solve_fix(detections, again, self.map, self.geom, fix.sensor_pose)

    def update(self, t: float, scan: LrfScan) -> Optional[LaserFix]:
        """Return the fix for *scan*, or None when too few reflectors match."""
        prior = self.predicted_prior(t)
        n = len(scan.detections)
        assoc = associate(scan.detections, prior, self.map, self.gate)
        if assoc.n_matched < self.required_matches(n) and self.search_turn > 0 and n >= 2:
            self.searches += 1
            assoc, prior = self._search(scan.detections, prior)
            log.debug("t=%.2f: heading search matched %d of %d", t, assoc.n_matched, n)
        try:
            fix = solve_fix(scan.detections, assoc, self.map, self.geom, prior)
        except InsufficientMatches as exc:
            self.failures += 1
            log.warning("t=%.2f: no laser fix (%s)", t, exc)
            return None
        if self.refine:
            fix = self._refined(scan.detections, fix, assoc)
        if self._fixes and t <= self._fixes[-1][0]:
            self._fixes.clear()
        self._fixes.append((t, fix.pose))
        if len(self._fixes) > 1:
            t_old, old = self._fixes[0]
            self._twist = chord_twist(old, fix.pose, t - t_old)
        self.prior = fix.sensor_pose
        return fix
