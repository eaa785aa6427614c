"""
records.py – Readers and writers for every file the toolkit produces.

  * truth CSV          t,x,y,theta
  * sensor JSONL       one frame per line, {"t", "odo"} or {"t", "lrf"}
  * trajectory CSV     t,x,y,theta,n_matched,residual_rms,degenerate_flag
  * report CSV / JSON  per-run RMSE and variance, averages, improvement
  * errors CSV         per-timestamp error of each estimator, outer-joined

Text files open with a ``# lgv_localization ...`` comment carrying the config
hash, seed and file kind; readers skip ``#`` lines.  Floats are written at
``repr`` precision so repeated runs produce identical bytes.
"""

import csv
import json
import re
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Sequence, TextIO, Tuple, Union

from error_handling import DataIOError, MalformedRecord
from estimators import TrajectoryRow
from evaluation import RunReport, column_name
from logger import get_logger
from sim import LrfScan, Odometry, SensorFrame, TruthSample
from world import Pose2D, ReflectorDetection

log = get_logger("records")

PathLike = Union[str, Path]

TRUTH_COLUMNS = ("t", "x", "y", "theta")
TRAJECTORY_COLUMNS = ("t", "x", "y", "theta", "n_matched", "residual_rms", "degenerate_flag")

_HEADER_RE = re.compile(r"^# lgv_localization config_hash=(\S+) seed=(-?\d+) kind=(\S+)\s*$")


class Header(NamedTuple):
    config_hash: str
    seed: int
    kind: str

    def line(self) -> str:
        return f"# lgv_localization config_hash={self.config_hash} seed={self.seed} kind={self.kind}"

    def as_kind(self, kind: str) -> "Header":
        return self._replace(kind=kind)

    def to_dict(self) -> Dict[str, Any]:
        return {"tool": "lgv_localization", **self._asdict()}


def parse_header(line: str) -> Optional[Header]:
    m = _HEADER_RE.match(line.rstrip("\n"))
    if m is None:
        return None
    return Header(m.group(1), int(m.group(2)), m.group(3))


def read_header(path: PathLike) -> Optional[Header]:
    """Header of a text artifact, or None if it has none."""
    with _open_read(path) as f:
        return parse_header(f.readline())


# ── File plumbing ────────────────────────────────────────────────────────────

@contextmanager
def _open_write(path: PathLike) -> Iterator[TextIO]:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from None
    log.info("wrote %s", path)


@contextmanager
def _open_read(path: PathLike) -> Iterator[TextIO]:
    try:
        f = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataIOError(f"no such file: {path}") from None
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from None
    with f:
        yield f


def _data_lines(f: TextIO) -> Iterator[Tuple[int, str]]:
    for line_no, line in enumerate(f, start=1):
        if line.startswith("#") or not line.strip():
            continue
        yield line_no, line


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _read_csv(path: PathLike, columns: Sequence[str]) -> Iterator[Tuple[int, Dict[str, str]]]:
    """Rows of a commented CSV as dicts; the first data line must be the
    expected column header."""
    with _open_read(path) as f:
        lines = _data_lines(f)
        try:
            line_no, head = next(lines)
        except StopIteration:
            raise MalformedRecord(str(path), 1, "missing column header") from None
        found = next(csv.reader([head]))
        if tuple(found[:len(columns)]) != tuple(columns):
            raise MalformedRecord(str(path), line_no, f"expected columns {','.join(columns)}")
        for line_no, line in lines:
            cells = next(csv.reader([line]))
            if len(cells) != len(found):
                raise MalformedRecord(str(path), line_no, f"expected {len(found)} cells, got {len(cells)}")
            yield line_no, dict(zip(found, cells))


def _float(row: Dict[str, str], key: str, path: PathLike, line_no: int) -> float:
    try:
        return float(row[key])
    except ValueError:
        raise MalformedRecord(str(path), line_no, f"{key} is not a number: {row[key]!r}") from None


# ── Truth ────────────────────────────────────────────────────────────────────

def write_truth(path: PathLike, truth: Sequence[TruthSample], header: Header) -> None:
    with _open_write(path) as f:
        f.write(header.as_kind("truth").line() + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for s in truth:
            w.writerow([_fmt(s.t), _fmt(s.pose.x), _fmt(s.pose.y), _fmt(s.pose.theta)])


def read_truth(path: PathLike) -> List[TruthSample]:
    out = []
    for line_no, row in _read_csv(path, TRUTH_COLUMNS):
        t, x, y, theta = (_float(row, k, path, line_no) for k in TRUTH_COLUMNS)
        try:
            out.append(TruthSample(t, Pose2D(x, y, theta)))
        except ValueError as exc:
            raise MalformedRecord(str(path), line_no, str(exc)) from None
    return out


# ── Sensor log ───────────────────────────────────────────────────────────────

def frame_to_dict(frame: SensorFrame) -> Dict[str, Any]:
    if isinstance(frame.payload, Odometry):
        odo = frame.payload
        return {"t": frame.t, "odo": {"wl": odo.w_l, "wr": odo.w_r, "gyro": odo.gyro_w}}
    return {
        "t": frame.t,
        "lrf": [{"range": d.range, "bearing": d.bearing} for d in frame.payload.detections],
    }


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    return float(value)


def frame_from_dict(data: Any) -> SensorFrame:
    """Inverse of :func:`frame_to_dict`; raises ValueError on bad shape."""
    if not isinstance(data, dict) or "t" not in data:
        raise ValueError("frame must be an object with a 't' field")
    t = _number(data["t"], "t")
    if ("odo" in data) == ("lrf" in data):
        raise ValueError("frame must carry exactly one of 'odo' or 'lrf'")
    if "odo" in data:
        odo = data["odo"]
        if not isinstance(odo, dict):
            raise ValueError("'odo' must be an object")
        try:
            return SensorFrame(t, Odometry(_number(odo["wl"], "wl"), _number(odo["wr"], "wr"),
                                           _number(odo["gyro"], "gyro")))
        except KeyError as exc:
            raise ValueError(f"'odo' is missing {exc.args[0]!r}") from None
    dets = data["lrf"]
    if not isinstance(dets, list):
        raise ValueError("'lrf' must be a list")
    detections = []
    for item in dets:
        if not isinstance(item, dict) or "range" not in item or "bearing" not in item:
            raise ValueError("each detection needs 'range' and 'bearing'")
        detections.append(ReflectorDetection(_number(item["range"], "range"),
                                              _number(item["bearing"], "bearing")))
    return SensorFrame(t, LrfScan(tuple(detections)))


def write_sensors(path: PathLike, frames: Sequence[SensorFrame], header: Header) -> None:
    with _open_write(path) as f:
        f.write(header.as_kind("sensors").line() + "\n")
        for frame in frames:
            f.write(json.dumps(frame_to_dict(frame), separators=(",", ":")) + "\n")


def read_sensors(path: PathLike) -> List[SensorFrame]:
    frames = []
    with _open_read(path) as f:
        for line_no, line in _data_lines(f):
            try:
                frames.append(frame_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise MalformedRecord(str(path), line_no, f"invalid JSON ({exc.msg})") from None
            except ValueError as exc:
                raise MalformedRecord(str(path), line_no, str(exc)) from None
    return frames


# ── Trajectories ─────────────────────────────────────────────────────────────

def write_trajectory(path: PathLike, rows: Sequence[TrajectoryRow], header: Header) -> None:
    with _open_write(path) as f:
        f.write(header.line() + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for r in rows:
            w.writerow([
                _fmt(r.t), _fmt(r.pose.x), _fmt(r.pose.y), _fmt(r.pose.theta),
                "" if r.n_matched is None else str(r.n_matched),
                _fmt(r.residual_rms),
                "" if r.degenerate is None else str(int(r.degenerate)),
            ])


def read_trajectory(path: PathLike) -> List[TrajectoryRow]:
    out = []
    for line_no, row in _read_csv(path, TRAJECTORY_COLUMNS):
        t, x, y, theta = (_float(row, k, path, line_no) for k in TRUTH_COLUMNS)
        try:
            n_matched = int(row["n_matched"]) if row["n_matched"] else None
            residual = float(row["residual_rms"]) if row["residual_rms"] else None
            flag = row["degenerate_flag"]
            if flag not in ("", "0", "1"):
                raise ValueError(f"degenerate_flag must be 0 or 1, got {flag!r}")
            out.append(TrajectoryRow(t, Pose2D(x, y, theta), n_matched, residual,
                                     None if flag == "" else flag == "1"))
        except ValueError as exc:
            raise MalformedRecord(str(path), line_no, str(exc)) from None
    return out


# ── Reports ──────────────────────────────────────────────────────────────────

def _report_columns(report: RunReport) -> List[str]:
    cols = ["run"]
    for name in report.estimators:
        cols += [f"{column_name(name)}_rmse", f"{column_name(name)}_var"]
    return cols


def write_report_csv(path: PathLike, report: RunReport, header: Header) -> None:
    """Per-run rows, an ``average`` row, and an ``improvement_pct`` row whose
    value sits in each improved arm's RMSE column."""
    data = report.to_dict()
    cols = _report_columns(report)
    improvements = report.improvements
    with _open_write(path) as f:
        f.write(header.as_kind("report").line() + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for row in data["per_run"]:  # type: ignore[attr-defined]
            w.writerow([row["run"]] + [_fmt(row[c]) for c in cols[1:]])
        average = data["average"]
        w.writerow(["average"] + [_fmt(average[c]) for c in cols[1:]])  # type: ignore[index]
        if improvements:
            cells = ["improvement_pct"]
            for name in report.estimators:
                cells += [_fmt(improvements.get(name)), ""]
            w.writerow(cells)


def write_report_json(path: PathLike, report: RunReport, header: Header) -> None:
    doc = {"header": header.as_kind("report").to_dict(), **report.to_dict()}
    with _open_write(path) as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def write_errors_csv(
    path: PathLike,
    names: Sequence[str],
    rows: Sequence[Tuple[float, Dict[str, float]]],
    header: Header,
) -> None:
    """Per-timestamp errors, ``t,<name>_err_mm,...``; empty cells where an
    arm has no estimate at that instant."""
    with _open_write(path) as f:
        f.write(header.as_kind("errors").line() + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t"] + [f"{column_name(n)}_err_mm" for n in names])
        for t, errs in rows:
            w.writerow([_fmt(t)] + [_fmt(errs.get(n)) for n in names])


def write_json(path: PathLike, doc: Dict[str, Any], header: Header) -> None:
    with _open_write(path) as f:
        json.dump({"header": header.to_dict(), **doc}, f, indent=2)
        f.write("\n")
