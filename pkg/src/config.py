"""
config.py – Constants, dataclasses, and run-configuration loading.

All magic numbers live here so the rest of the codebase stays clean.
Internal units are SI (meters, radians, seconds); the run-configuration JSON
may give any angle as ``<name>_deg`` instead, which is converted on load.

Vehicle geometry and noise defaults are synthetic calibration values, not
measurements.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from error_handling import ConfigError, DataIOError
from world import Pose2D, ReflectorMap

# ── Sensor timing ────────────────────────────────────────────────────────────
TRUTH_TICK = 0.05          # seconds between ground-truth samples
ODOMETRY_PERIOD = 0.1      # encoder/gyro frame period (MCU link rate)
LRF_PERIOD = 0.45          # laser-navigation fix period
GYRO_RANGE = math.radians(360.0)   # gyro saturates at ±360°/s

# ── Vehicle (synthetic forklift values) ──────────────────────────────────────
DEFAULT_H = 1.3            # ICR to drive-wheel lever arm, m
DEFAULT_L = 0.8            # auxiliary-wheel track width, m
DEFAULT_WHEEL_RADIUS = 0.125
DEFAULT_SENSOR_OFFSET = 1.2   # LRF ahead of the rotation center, m

# ── Noise ─────────────────────────────────────────────────────────────────────
DEFAULT_ENCODER_RATE_STDDEV = 0.05    # rad/s
DEFAULT_GYRO_RATE_STDDEV = 0.005      # rad/s
DEFAULT_GYRO_BIAS = 0.0005            # rad/s
DEFAULT_LRF_RANGE_STDDEV = 0.02       # m
DEFAULT_LRF_BEARING_STDDEV = 0.002    # rad
DEFAULT_DETECTION_PROB = 0.9
DEFAULT_CLUTTER_RATE = 0.0
DEFAULT_MAX_LRF_RANGE = 30.0          # m
DEFAULT_BEARING_SMEAR_GAIN = 0.05     # rad of bearing stddev per rad/s of turn rate

# ── Particle filter ──────────────────────────────────────────────────────────
DEFAULT_PARTICLES = 150
DEFAULT_EXPLOIT_FRACTION = 0.95
DEFAULT_ELITE_QUANTILE = 0.25
DEFAULT_REDISTRIBUTION_RANGE = 0.25   # ±25 cm
DEFAULT_HEADING_JITTER = 0.175        # ±10°
DEFAULT_FLOOR_QUANTILE = 0.15
DEFAULT_DISTANCE_SCALE = 0.1          # m, divisor applied before the unit-variance kernel
DEFAULT_MOTION_V_STDDEV = 0.02        # m/s
DEFAULT_MOTION_W_STDDEV = 0.02        # rad/s
DEFAULT_PREDICT_SUBSTEPS = 1

# ── Global localization (unknown start) ──────────────────────────────────────
# Wide gate and coarse kernel so a pose off by a meter still scores above
# chance; enough particles that some land within that basin.
GLOBAL_PARTICLES = 40000
GLOBAL_GATE = 3.0                     # m
GLOBAL_DISTANCE_SCALE = 1.0           # m

# ── Association ──────────────────────────────────────────────────────────────
DEFAULT_GATE = 0.5                    # m
DEFAULT_SEARCH_TURN = math.radians(30.0)   # laser-only heading search half-width
DEFAULT_SEARCH_STEP = math.radians(1.0)
DEFAULT_MIN_MATCH_FRACTION = 0.5     # below this share of matched detections, search

# ── Reference experiment ─────────────────────────────────────────────────────
REFERENCE_SPEED = 0.36                # m/s at the rotation center
REFERENCE_STEERING = math.radians(60.0)
REFERENCE_LAPS = 8
REFERENCE_RUNS = 8
DEFAULT_SEED = 7

# Published improvement figures; reports list them next to the computed one.
QUOTED_IMPROVEMENTS = {"results": 66.5, "summary": 85.5}


class AngularSource(Enum):
    GYRO = "gyro"
    ENCODERS = "encoders"
    AVERAGE = "average"


def _positive(value: float, path: str) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{path} must be > 0, got {value!r}", path)


def _non_negative(value: float, path: str) -> None:
    if not (math.isfinite(value) and value >= 0):
        raise ConfigError(f"{path} must be >= 0, got {value!r}", path)


def _fraction(value: float, path: str, allow_zero: bool = True) -> None:
    low_ok = value >= 0 if allow_zero else value > 0
    if not (math.isfinite(value) and low_ok and value <= 1):
        raise ConfigError(f"{path} must lie in {'[0' if allow_zero else '(0'}, 1], got {value!r}", path)


@dataclass(frozen=True)
class VehicleGeometry:
    """Drive and sensor geometry.  ``doubled_rim_speed`` doubles the wheel-rim
    speed; ``arctan_turn_rate`` uses an arctangent form for the turn rate."""

    h: float = DEFAULT_H
    l: float = DEFAULT_L
    r_l: float = DEFAULT_WHEEL_RADIUS
    r_r: float = DEFAULT_WHEEL_RADIUS
    d: float = DEFAULT_SENSOR_OFFSET
    doubled_rim_speed: bool = False
    arctan_turn_rate: bool = False

    def __post_init__(self):
        for name in ("h", "l", "r_l", "r_r"):
            _positive(getattr(self, name), f"vehicle.{name}")
        _non_negative(self.d, "vehicle.d")


@dataclass(frozen=True)
class NoiseModel:
    encoder_rate_stddev: float = DEFAULT_ENCODER_RATE_STDDEV
    gyro_rate_stddev: float = DEFAULT_GYRO_RATE_STDDEV
    gyro_bias: float = DEFAULT_GYRO_BIAS
    lrf_range_stddev: float = DEFAULT_LRF_RANGE_STDDEV
    lrf_bearing_stddev: float = DEFAULT_LRF_BEARING_STDDEV
    detection_prob: float = DEFAULT_DETECTION_PROB
    clutter_rate: float = DEFAULT_CLUTTER_RATE
    max_lrf_range: float = DEFAULT_MAX_LRF_RANGE
    bearing_smear_gain: float = DEFAULT_BEARING_SMEAR_GAIN
    encoder_pulses: int = 0               # 0 disables count quantization
    gyro_range: float = GYRO_RANGE

    def __post_init__(self):
        if int(self.encoder_pulses) != self.encoder_pulses or self.encoder_pulses < 0:
            raise ConfigError("noise.encoder_pulses must be a non-negative integer",
                              "noise.encoder_pulses")
        _positive(self.gyro_range, "noise.gyro_range")
        for name in ("encoder_rate_stddev", "gyro_rate_stddev", "lrf_range_stddev",
                     "lrf_bearing_stddev", "clutter_rate", "bearing_smear_gain"):
            _non_negative(getattr(self, name), f"noise.{name}")
        if not math.isfinite(self.gyro_bias):
            raise ConfigError("noise.gyro_bias must be finite", "noise.gyro_bias")
        _fraction(self.detection_prob, "noise.detection_prob")
        _positive(self.max_lrf_range, "noise.max_lrf_range")

    @classmethod
    def noiseless(cls, **overrides: Any) -> "NoiseModel":
        """Zero noise, certain detection, no clutter."""
        values: Dict[str, Any] = dict(
            encoder_rate_stddev=0.0, gyro_rate_stddev=0.0, gyro_bias=0.0,
            lrf_range_stddev=0.0, lrf_bearing_stddev=0.0, detection_prob=1.0,
            clutter_rate=0.0, bearing_smear_gain=0.0, encoder_pulses=0,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class SensorTiming:
    """Truth sampling tick and sensor frame periods.  Both periods must be
    whole multiples of the tick."""

    tick: float = TRUTH_TICK
    odometry_period: float = ODOMETRY_PERIOD
    lrf_period: float = LRF_PERIOD

    def __post_init__(self):
        for name in ("tick", "odometry_period", "lrf_period"):
            _positive(getattr(self, name), f"timing.{name}")
        for name in ("odometry_period", "lrf_period"):
            ratio = getattr(self, name) / self.tick
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise ConfigError(f"timing.{name} must be a multiple of timing.tick", f"timing.{name}")

    def ticks(self, period: float) -> int:
        return int(round(period / self.tick))


@dataclass(frozen=True)
class Segment:
    """Constant drive command held for ``duration`` seconds."""

    duration: float
    v_d: float
    delta: float

    def __post_init__(self):
        _positive(self.duration, "trajectory.segments.duration")
        if not math.isfinite(self.v_d):
            raise ConfigError("trajectory.segments.v_d must be finite", "trajectory.segments.v_d")


@dataclass(frozen=True)
class TrajectorySpec:
    initial_pose: Pose2D
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ConfigError("trajectory needs at least one segment", "trajectory.segments")

    @property
    def duration(self) -> float:
        return sum(seg.duration for seg in self.segments)


@dataclass(frozen=True)
class PfConfig:
    """Particle-filter settings.  ``floor_quantile`` is the nominal share of
    globally re-seeded particles; the uniform share
    actually drawn is ``1 - exploit_fraction``.  ``predict_substeps`` splits
    each motion prediction into that many equal Euler steps."""

    M: int = DEFAULT_PARTICLES
    exploit_fraction: float = DEFAULT_EXPLOIT_FRACTION
    elite_quantile: float = DEFAULT_ELITE_QUANTILE
    redistribution_range: float = DEFAULT_REDISTRIBUTION_RANGE
    heading_jitter: float = DEFAULT_HEADING_JITTER
    floor_quantile: float = DEFAULT_FLOOR_QUANTILE
    angular_source: AngularSource = AngularSource.GYRO
    gate: float = DEFAULT_GATE
    distance_scale: float = DEFAULT_DISTANCE_SCALE
    unmatched_penalty: Optional[float] = None   # m²; None means gate²
    motion_v_stddev: float = DEFAULT_MOTION_V_STDDEV
    motion_w_stddev: float = DEFAULT_MOTION_W_STDDEV
    arithmetic_heading_mean: bool = False
    predict_substeps: int = DEFAULT_PREDICT_SUBSTEPS

    def __post_init__(self):
        if isinstance(self.angular_source, str):
            object.__setattr__(self, "angular_source", _angular_source(self.angular_source))
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"pf.M must be a positive integer, got {self.M!r}", "pf.M")
        if int(self.predict_substeps) != self.predict_substeps or self.predict_substeps < 1:
            raise ConfigError("pf.predict_substeps must be a positive integer", "pf.predict_substeps")
        _fraction(self.exploit_fraction, "pf.exploit_fraction")
        _fraction(self.elite_quantile, "pf.elite_quantile", allow_zero=False)
        _fraction(self.floor_quantile, "pf.floor_quantile")
        for name in ("redistribution_range", "heading_jitter", "motion_v_stddev", "motion_w_stddev"):
            _non_negative(getattr(self, name), f"pf.{name}")
        _positive(self.gate, "pf.gate")
        _positive(self.distance_scale, "pf.distance_scale")
        if self.unmatched_penalty is not None:
            _non_negative(self.unmatched_penalty, "pf.unmatched_penalty")

    @property
    def penalty(self) -> float:
        """Squared-distance charge for one unmatched detection, m²."""
        return self.gate ** 2 if self.unmatched_penalty is None else self.unmatched_penalty


def global_localization_config(**overrides: Any) -> PfConfig:
    """Static settings for localizing with no prior pose."""
    values: Dict[str, Any] = dict(M=GLOBAL_PARTICLES, gate=GLOBAL_GATE,
                                  distance_scale=GLOBAL_DISTANCE_SCALE)
    values.update(overrides)
    return PfConfig(**values)


@dataclass(frozen=True)
class LaserNavConfig:
    """Laser-only baseline.  ``extrapolate`` advances the previous fix by the
    motion seen between the two fixes before it; ``search_turn`` of 0 turns
    the heading search off.  The search runs when fewer than
    ``min_match_fraction`` of the detections (and always fewer than two)
    associate.  ``refine`` re-associates once from the solved pose."""

    gate: float = DEFAULT_GATE
    extrapolate: bool = True
    search_turn: float = DEFAULT_SEARCH_TURN
    search_step: float = DEFAULT_SEARCH_STEP
    min_match_fraction: float = DEFAULT_MIN_MATCH_FRACTION
    refine: bool = True

    def __post_init__(self):
        _positive(self.gate, "lasernav.gate")
        _fraction(self.min_match_fraction, "lasernav.min_match_fraction")
        _non_negative(self.search_turn, "lasernav.search_turn")
        _positive(self.search_step, "lasernav.search_step")


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved experiment configuration."""

    seed: int
    vehicle: VehicleGeometry
    map: ReflectorMap
    trajectory: TrajectorySpec
    noise: NoiseModel = field(default_factory=NoiseModel)
    timing: SensorTiming = field(default_factory=SensorTiming)
    pf: PfConfig = field(default_factory=PfConfig)
    lasernav: LaserNavConfig = field(default_factory=LaserNavConfig)
    pf_global: PfConfig = field(default_factory=global_localization_config)
    output_dir: str = "out"

    def to_dict(self) -> Dict[str, Any]:
        """Canonical JSON-ready form; the basis of :func:`config_hash`."""
        pf = _pf_dict(self.pf)
        pose = self.trajectory.initial_pose
        return {
            "seed": self.seed,
            "vehicle": asdict(self.vehicle),
            "map": self.map.to_dict(),
            "trajectory": {
                "initial_pose": {"x": pose.x, "y": pose.y, "theta": pose.theta},
                "segments": [asdict(seg) for seg in self.trajectory.segments],
            },
            "noise": asdict(self.noise),
            "timing": asdict(self.timing),
            "pf": pf,
            "pf_global": _pf_dict(self.pf_global),
            "lasernav": asdict(self.lasernav),
        }

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


def _pf_dict(pf: PfConfig) -> Dict[str, Any]:
    out = asdict(pf)
    out["angular_source"] = pf.angular_source.value
    return out


def config_hash(cfg: RunConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical configuration."""
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ── Loading ──────────────────────────────────────────────────────────────────

def _angular_source(value: str) -> AngularSource:
    try:
        return AngularSource(value)
    except ValueError:
        names = ", ".join(s.value for s in AngularSource)
        raise ConfigError(f"pf.angular_source must be one of {names}, got {value!r}",
                          "pf.angular_source") from None


def _section(data: Mapping[str, Any], key: str, required: bool) -> Dict[str, Any]:
    if key not in data:
        if required:
            raise ConfigError(f"missing field {key}", key)
        return {}
    value = data[key]
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object", key)
    return dict(value)


def _number(section: Dict[str, Any], key: str, path: str,
            default: Optional[float] = None, angle: bool = False) -> float:
    """Pop *key* (or ``<key>_deg`` when *angle*) from *section*."""
    if key in section:
        raw = section.pop(key)
        scale = 1.0
    elif angle and f"{key}_deg" in section:
        raw = section.pop(f"{key}_deg")
        scale = math.pi / 180.0
    elif default is not None:
        return default
    else:
        raise ConfigError(f"missing field {path}.{key}", f"{path}.{key}")
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {raw!r}", f"{path}.{key}")
    return float(raw) * scale


def _flag(section: Dict[str, Any], key: str, path: str, default: bool = False) -> bool:
    raw = section.pop(key, default)
    if not isinstance(raw, bool):
        raise ConfigError(f"{path}.{key} must be true or false", f"{path}.{key}")
    return raw


def _aliased_flag(section: Dict[str, Any], key: str, alias: str, path: str,
                  default: bool = False) -> bool:
    """Read a flag that may also be spelled *alias*; the two must agree."""
    if key in section and alias in section:
        value = _flag(section, key, path)
        if _flag(section, alias, path) != value:
            raise ConfigError(f"{path}.{key} and {path}.{alias} disagree", f"{path}.{alias}")
        return value
    if alias in section:
        return _flag(section, alias, path)
    return _flag(section, key, path, default)


def _no_leftovers(section: Dict[str, Any], path: str) -> None:
    if section:
        key = sorted(section)[0]
        raise ConfigError(f"unknown field {path}.{key}", f"{path}.{key}")


def _load_vehicle(data: Mapping[str, Any]) -> VehicleGeometry:
    sec = _section(data, "vehicle", required=True)
    geom = VehicleGeometry(
        h=_number(sec, "h", "vehicle"),
        l=_number(sec, "l", "vehicle"),
        r_l=_number(sec, "r_l", "vehicle"),
        r_r=_number(sec, "r_r", "vehicle"),
        d=_number(sec, "d", "vehicle"),
        doubled_rim_speed=_aliased_flag(sec, "doubled_rim_speed", "eq2_literal", "vehicle"),
        arctan_turn_rate=_aliased_flag(sec, "arctan_turn_rate", "eq3_literal", "vehicle"),
    )
    _no_leftovers(sec, "vehicle")
    return geom


def _load_noise(data: Mapping[str, Any]) -> NoiseModel:
    sec = _section(data, "noise", required=False)
    base = NoiseModel()
    noise = NoiseModel(
        encoder_rate_stddev=_number(sec, "encoder_rate_stddev", "noise", base.encoder_rate_stddev),
        gyro_rate_stddev=_number(sec, "gyro_rate_stddev", "noise", base.gyro_rate_stddev, angle=True),
        gyro_bias=_number(sec, "gyro_bias", "noise", base.gyro_bias, angle=True),
        lrf_range_stddev=_number(sec, "lrf_range_stddev", "noise", base.lrf_range_stddev),
        lrf_bearing_stddev=_number(sec, "lrf_bearing_stddev", "noise", base.lrf_bearing_stddev, angle=True),
        detection_prob=_number(sec, "detection_prob", "noise", base.detection_prob),
        clutter_rate=_number(sec, "clutter_rate", "noise", base.clutter_rate),
        max_lrf_range=_number(sec, "max_lrf_range", "noise", base.max_lrf_range),
        bearing_smear_gain=_number(sec, "bearing_smear_gain", "noise", base.bearing_smear_gain),
        encoder_pulses=int(_number(sec, "encoder_pulses", "noise", float(base.encoder_pulses))),
        gyro_range=_number(sec, "gyro_range", "noise", base.gyro_range, angle=True),
    )
    _no_leftovers(sec, "noise")
    return noise


def _load_timing(data: Mapping[str, Any]) -> SensorTiming:
    sec = _section(data, "timing", required=False)
    timing = SensorTiming(
        tick=_number(sec, "tick", "timing", TRUTH_TICK),
        odometry_period=_number(sec, "odometry_period", "timing", ODOMETRY_PERIOD),
        lrf_period=_number(sec, "lrf_period", "timing", LRF_PERIOD),
    )
    _no_leftovers(sec, "timing")
    return timing


def _load_pf(data: Mapping[str, Any], key: str = "pf",
             base: Optional[PfConfig] = None) -> PfConfig:
    sec = _section(data, key, required=False)
    base = PfConfig() if base is None else base
    m_raw = sec.pop("M", base.M)
    if isinstance(m_raw, bool) or not isinstance(m_raw, int):
        raise ConfigError(f"{key}.M must be an integer, got {m_raw!r}", f"{key}.M")
    steps = sec.pop("predict_substeps", base.predict_substeps)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ConfigError(f"{key}.predict_substeps must be an integer", f"{key}.predict_substeps")
    penalty = sec.pop("unmatched_penalty", base.unmatched_penalty)
    if penalty is not None and not isinstance(penalty, (int, float)):
        raise ConfigError(f"{key}.unmatched_penalty must be a number", f"{key}.unmatched_penalty")
    pf = PfConfig(
        M=m_raw,
        exploit_fraction=_number(sec, "exploit_fraction", key, base.exploit_fraction),
        elite_quantile=_number(sec, "elite_quantile", key, base.elite_quantile),
        redistribution_range=_number(sec, "redistribution_range", key, base.redistribution_range),
        heading_jitter=_number(sec, "heading_jitter", key, base.heading_jitter, angle=True),
        floor_quantile=_number(sec, "floor_quantile", key, base.floor_quantile),
        angular_source=_angular_source(sec.pop("angular_source", base.angular_source.value)),
        gate=_number(sec, "gate", key, base.gate),
        distance_scale=_number(sec, "distance_scale", key, base.distance_scale),
        unmatched_penalty=None if penalty is None else float(penalty),
        motion_v_stddev=_number(sec, "motion_v_stddev", key, base.motion_v_stddev),
        motion_w_stddev=_number(sec, "motion_w_stddev", key, base.motion_w_stddev, angle=True),
        arithmetic_heading_mean=_aliased_flag(sec, "arithmetic_heading_mean", "eq11_literal",
                                              key, base.arithmetic_heading_mean),
        predict_substeps=steps,
    )
    _no_leftovers(sec, key)
    return pf


def _load_lasernav(data: Mapping[str, Any]) -> LaserNavConfig:
    sec = _section(data, "lasernav", required=False)
    cfg = LaserNavConfig(
        gate=_number(sec, "gate", "lasernav", DEFAULT_GATE),
        extrapolate=_flag(sec, "extrapolate", "lasernav", default=True),
        search_turn=_number(sec, "search_turn", "lasernav", DEFAULT_SEARCH_TURN, angle=True),
        search_step=_number(sec, "search_step", "lasernav", DEFAULT_SEARCH_STEP, angle=True),
        min_match_fraction=_number(sec, "min_match_fraction", "lasernav", DEFAULT_MIN_MATCH_FRACTION),
        refine=_flag(sec, "refine", "lasernav", default=True),
    )
    _no_leftovers(sec, "lasernav")
    return cfg


def _load_pose(raw: Any, path: str) -> Pose2D:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be an object with x, y, theta", path)
    sec = dict(raw)
    pose = Pose2D(_number(sec, "x", path), _number(sec, "y", path),
                  _number(sec, "theta", path, 0.0, angle=True))
    _no_leftovers(sec, path)
    return pose


def _load_trajectory(data: Mapping[str, Any], vehicle: VehicleGeometry,
                     timing: SensorTiming) -> TrajectorySpec:
    sec = _section(data, "trajectory", required=True)
    if "initial_pose" not in sec:
        raise ConfigError("missing field trajectory.initial_pose", "trajectory.initial_pose")
    pose = _load_pose(sec.pop("initial_pose"), "trajectory.initial_pose")
    if "segments" in sec:
        segments = []
        for i, raw in enumerate(sec.pop("segments")):
            path = f"trajectory.segments[{i}]"
            if not isinstance(raw, dict):
                raise ConfigError(f"{path} must be an object", path)
            item = dict(raw)
            segments.append(Segment(
                duration=_number(item, "duration", path),
                v_d=_number(item, "v_d", path),
                delta=_number(item, "delta", path, angle=True),
            ))
            _no_leftovers(item, path)
    elif "laps" in sec:
        segments = [_circle_segment(sec, vehicle, timing)]
    else:
        raise ConfigError("missing field trajectory.segments (or trajectory.laps)",
                          "trajectory.segments")
    _no_leftovers(sec, "trajectory")
    return TrajectorySpec(pose, tuple(segments))


def _circle_segment(sec: Dict[str, Any], vehicle: VehicleGeometry,
                    timing: SensorTiming) -> Segment:
    """Resolve ``{"laps": n, "v": .., "delta_deg": ..}`` into one segment.

    ``v`` is the rotation-center speed (``v_d`` may be given instead).  The
    turn rate is v_d / h, so one lap takes 2πh / |v_d|; the total duration is
    snapped to a whole number of truth ticks.
    """
    laps = _number(sec, "laps", "trajectory")
    _positive(laps, "trajectory.laps")
    delta = _number(sec, "delta", "trajectory", angle=True)
    if abs(delta) >= math.pi / 2 or delta == 0:
        raise ConfigError("trajectory.delta must satisfy 0 < |delta| < 90° for a circle",
                          "trajectory.delta")
    if "v" in sec:
        v_d = _number(sec, "v", "trajectory") / math.cos(delta)
    else:
        v_d = _number(sec, "v_d", "trajectory")
    _positive(abs(v_d), "trajectory.v")
    duration = laps * 2.0 * math.pi * vehicle.h / abs(v_d)
    duration = max(1, round(duration / timing.tick)) * timing.tick
    return Segment(duration, v_d, delta)


def load_run_config(
    source: Union[str, Path, Mapping[str, Any]],
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> RunConfig:
    """Read and validate a run configuration.

    *source* is a path to a JSON file or an already-parsed mapping.  A
    ``"map"`` entry may be inline or a path, resolved relative to the config
    file.  *seed* and *output_dir* override the file's values.
    """
    base_dir = Path(".")
    if isinstance(source, Mapping):
        data = dict(source)
    else:
        path = Path(source)
        base_dir = path.parent
        data = _read_json(path)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")

    map_raw = data.pop("map", None)
    if map_raw is None:
        raise ConfigError("missing field map", "map")
    if isinstance(map_raw, str):
        map_raw = _read_json(base_dir / map_raw)
    if not isinstance(map_raw, dict):
        raise ConfigError("map must be an object or a path to a map file", "map")
    reflector_map = ReflectorMap.from_dict(map_raw)

    vehicle = _load_vehicle(data)
    data.pop("vehicle", None)
    timing = _load_timing(data)
    data.pop("timing", None)
    trajectory = _load_trajectory(data, vehicle, timing)
    data.pop("trajectory", None)
    noise = _load_noise(data)
    data.pop("noise", None)
    pf = _load_pf(data)
    data.pop("pf", None)
    lasernav = _load_lasernav(data)
    data.pop("lasernav", None)
    pf_global = _load_pf(data, "pf_global", global_localization_config())
    data.pop("pf_global", None)

    file_seed = data.pop("seed", DEFAULT_SEED)
    if isinstance(file_seed, bool) or not isinstance(file_seed, int):
        raise ConfigError(f"seed must be an integer, got {file_seed!r}", "seed")
    file_out = data.pop("output_dir", "out")
    _no_leftovers(data, "config")

    return RunConfig(
        seed=file_seed if seed is None else seed,
        vehicle=vehicle,
        map=reflector_map,
        trajectory=trajectory,
        noise=noise,
        timing=timing,
        pf=pf,
        lasernav=lasernav,
        pf_global=pf_global,
        output_dir=str(file_out if output_dir is None else output_dir),
    )


def _read_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataIOError(f"no such file: {path}") from None
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
