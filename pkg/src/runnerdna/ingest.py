"""Parsing, validation and 1 Hz alignment of smartphone sensor logs.

A record on disk is a triple of files sharing a stem::

    <record_id>.csv       time + 18 sensor-axis columns
    <record_id>.gps.csv   time,lat,lon   (optional)
    <record_id>.json      record_id, label, volunteer_id, sex, height, weight
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    GapTooLarge,
    InvalidRecord,
    MalformedTimestamp,
    MissingColumn,
    NonFiniteValue,
    TooShort,
)

TIME_FORMAT = "%Y%m%d %H:%M:%S"
MIN_SAMPLES = 30
MAX_GAP_S = 5
SPAN_TOLERANCE_S = 2.0


class Sensor(str, enum.Enum):
    ACCELEROMETER = "Accelerometer"
    LINEAR_ACCELERATION = "LinearAcceleration"
    GRAVITY = "Gravity"
    MAGNETIC = "Magnetic"
    ORIENTATION = "Orientation"
    GYROSCOPE = "Gyroscope"

    @property
    def prefix(self) -> str:
        return _PREFIX[self]


_PREFIX = {
    Sensor.ACCELEROMETER: "acc",
    Sensor.LINEAR_ACCELERATION: "lacc",
    Sensor.GRAVITY: "grav",
    Sensor.MAGNETIC: "mag",
    Sensor.ORIENTATION: "ori",
    Sensor.GYROSCOPE: "gyr",
}


class Axis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


class Activity(str, enum.Enum):
    BIKING = "Biking"
    EBIKE_RIDING = "EBikeRiding"
    WALKING = "Walking"
    RUNNING = "Running"


class Sex(str, enum.Enum):
    MALE = "Male"
    FEMALE = "Female"


class AlignPolicy(str, enum.Enum):
    MEAN_PER_SECOND = "MeanPerSecond"
    FIRST_PER_SECOND = "FirstPerSecond"


SERIES_KEYS: tuple[tuple[Sensor, Axis], ...] = tuple(
    (s, a) for s in Sensor for a in Axis
)


def column_name(sensor: Sensor, axis: Axis) -> str:
    return f"{sensor.prefix}_{axis.value.lower()}"


CSV_COLUMNS: tuple[str, ...] = ("time",) + tuple(column_name(s, a) for s, a in SERIES_KEYS)
GPS_COLUMNS = ("time", "lat", "lon")


@dataclass(frozen=True)
class SensorAxisSeries:
    sensor: Sensor
    axis: Axis
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=float)
        vs = np.array(self.values, dtype=float)
        if ts.ndim != 1 or ts.shape != vs.shape:
            raise InvalidRecord(f"{self.name}: timestamps and values differ in length")
        if len(ts) < 2:
            raise TooShort(f"{self.name}: need at least 2 samples, got {len(ts)}")
        if not (np.all(np.isfinite(vs)) and np.all(np.isfinite(ts))):
            raise NonFiniteValue(f"{self.name}: non-finite sample")
        if np.any(np.diff(ts) < 0):
            raise InvalidRecord(f"{self.name}: timestamps decrease")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    @property
    def name(self) -> str:
        return column_name(self.sensor, self.axis)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, SensorAxisSeries):
            return NotImplemented
        return (
            self.sensor == other.sensor
            and self.axis == other.axis
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class GpsPoint:
    lat: float
    lon: float
    timestamp: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lat, self.lon, self.timestamp)):
            raise NonFiniteValue(f"non-finite GPS fix {self}")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidRecord(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidRecord(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class VolunteerProfile:
    volunteer_id: str
    sex: Sex
    height: float
    weight: float

    def __post_init__(self):
        object.__setattr__(self, "sex", Sex(self.sex))
        if not 100 <= self.height <= 250:
            raise InvalidRecord(f"height {self.height} cm outside [100, 250]")
        if not 30 <= self.weight <= 200:
            raise InvalidRecord(f"weight {self.weight} kg outside [30, 200]")


@dataclass(frozen=True)
class RecordMeta:
    record_id: str
    label: Activity
    volunteer: VolunteerProfile

    def __post_init__(self):
        object.__setattr__(self, "label", Activity(self.label))


@dataclass(frozen=True)
class ActivityRecord:
    record_id: str
    label: Activity
    volunteer: VolunteerProfile
    series: Mapping[tuple[Sensor, Axis], SensorAxisSeries]
    gps: tuple[GpsPoint, ...] | None = field(default=None)

    def __post_init__(self):
        missing = [column_name(*k) for k in SERIES_KEYS if k not in self.series]
        if missing:
            raise MissingColumn(f"{self.record_id}: missing series {', '.join(missing)}")
        if len(self.series) != len(SERIES_KEYS):
            raise InvalidRecord(f"{self.record_id}: unexpected series keys")
        starts = [s.timestamps[0] for s in self.series.values()]
        ends = [s.timestamps[-1] for s in self.series.values()]
        if max(starts) - min(starts) > SPAN_TOLERANCE_S or max(ends) - min(ends) > SPAN_TOLERANCE_S:
            raise InvalidRecord(f"{self.record_id}: series cover different time spans")
        # canonical key order regardless of construction order
        object.__setattr__(self, "series", {k: self.series[k] for k in SERIES_KEYS})
        if self.gps is not None:
            object.__setattr__(self, "gps", tuple(self.gps))

    @property
    def meta(self) -> RecordMeta:
        return RecordMeta(self.record_id, self.label, self.volunteer)

    def values(self, sensor: Sensor, axis: Axis) -> np.ndarray:
        return self.series[(sensor, axis)].values

    def __len__(self) -> int:
        return min(len(s) for s in self.series.values())


def parse_timestamp(text: str) -> float:
    """Epoch seconds (UTC) from ``YYYYMMDD HH:MM:SS``, falling back to ISO-8601."""
    text = text.strip()
    try:
        dt = datetime.strptime(text, TIME_FORMAT)
    except ValueError:
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise MalformedTimestamp(f"unparsable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(t: float) -> str:
    dt = datetime.fromtimestamp(t, tz=timezone.utc)
    if t != math.floor(t):
        return dt.isoformat()
    return dt.strftime(TIME_FORMAT)


def _parse_value(text: str, column: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise NonFiniteValue(f"line {line}, column {column}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise NonFiniteValue(f"line {line}, column {column}: non-finite value {text!r}")
    return v


def _read_table(text: str, required: Iterable[str]) -> tuple[list[float], dict[str, list[float]]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("empty CSV: no header row") from None
    required = list(required)
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}")
    index = {c: header.index(c) for c in required}
    times: list[float] = []
    columns: dict[str, list[float]] = {c: [] for c in required if c != "time"}
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise MissingColumn(f"line {line}: expected {len(header)} fields, got {len(row)}")
        times.append(parse_timestamp(row[index["time"]]))
        for c in columns:
            columns[c].append(_parse_value(row[index[c]], c, line))
    return times, columns


def parse_activity_csv(text: str, meta: RecordMeta) -> ActivityRecord:
    """Parse one sensor CSV into an unaligned record.

    Rows are stably sorted by time; duplicate seconds are kept until
    :func:`align_series` collapses them. The 30-sample floor is enforced at
    alignment, where the sample count becomes meaningful.
    """
    times, columns = _read_table(text, CSV_COLUMNS)
    if len(times) < 2:
        raise TooShort(f"{meta.record_id}: need at least 2 rows, got {len(times)}")
    order = np.argsort(np.asarray(times), kind="stable")
    ts = np.asarray(times)[order]
    series = {
        (s, a): SensorAxisSeries(s, a, ts, np.asarray(columns[column_name(s, a)])[order])
        for s, a in SERIES_KEYS
    }
    return ActivityRecord(meta.record_id, meta.label, meta.volunteer, series)


def _fmt(v: float) -> str:
    return repr(float(v))


def serialize_activity_csv(record: ActivityRecord) -> str:
    """Inverse of :func:`parse_activity_csv` for records with shared timestamps."""
    ts = record.series[SERIES_KEYS[0]].timestamps
    for s in record.series.values():
        if not np.array_equal(s.timestamps, ts):
            raise InvalidRecord(f"{record.record_id}: series do not share timestamps")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    cols = [record.series[k].values for k in SERIES_KEYS]
    for i, t in enumerate(ts):
        writer.writerow([format_timestamp(t)] + [_fmt(c[i]) for c in cols])
    return buf.getvalue()


def parse_gps_csv(text: str) -> tuple[GpsPoint, ...]:
    times, columns = _read_table(text, GPS_COLUMNS)
    points = [GpsPoint(lat, lon, t) for t, lat, lon in zip(times, columns["lat"], columns["lon"])]
    return tuple(sorted(points, key=lambda p: p.timestamp))


def serialize_gps_csv(points: Iterable[GpsPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(GPS_COLUMNS)
    for p in points:
        writer.writerow([format_timestamp(p.timestamp), _fmt(p.lat), _fmt(p.lon)])
    return buf.getvalue()


def parse_metadata(text: str) -> RecordMeta:
    try:
        raw = json.loads(text)
        volunteer = VolunteerProfile(
            volunteer_id=str(raw["volunteer_id"]),
            sex=Sex(raw["sex"]),
            height=float(raw["height"]),
            weight=float(raw["weight"]),
        )
        return RecordMeta(str(raw["record_id"]), Activity(raw["label"]), volunteer)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InvalidRecord(f"bad metadata: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, InvalidRecord):
            raise
        raise InvalidRecord(f"bad metadata: {exc}") from None


def serialize_metadata(meta: RecordMeta) -> str:
    v = meta.volunteer
    payload = {
        "record_id": meta.record_id,
        "label": meta.label.value,
        "volunteer_id": v.volunteer_id,
        "sex": v.sex.value,
        "height": v.height,
        "weight": v.weight,
    }
    return json.dumps(payload, indent=2) + "\n"


def _collapse(series: SensorAxisSeries, policy: AlignPolicy, max_gap: int) -> SensorAxisSeries:
    seconds = np.floor(series.timestamps)
    grid, starts, counts = np.unique(seconds, return_index=True, return_counts=True)
    if len(grid) > 1:
        gap = np.diff(grid).max()
        if gap > max_gap:
            raise GapTooLarge(f"{series.name}: {gap:.0f} s gap exceeds {max_gap} s")
    if policy is AlignPolicy.MEAN_PER_SECOND:
        values = np.add.reduceat(series.values, starts) / counts
    else:
        values = series.values[starts]
    return SensorAxisSeries(series.sensor, series.axis, grid, values)


def align_series(
    record: ActivityRecord,
    policy: AlignPolicy = AlignPolicy.MEAN_PER_SECOND,
    *,
    min_samples: int = MIN_SAMPLES,
    max_gap: int = MAX_GAP_S,
) -> ActivityRecord:
    """Collapse every series onto a strictly increasing 1 Hz grid.

    Samples sharing a second are merged according to ``policy``. Gaps longer
    than ``max_gap`` seconds raise :class:`GapTooLarge`; nothing is interpolated.
    """
    policy = AlignPolicy(policy)
    series = {k: _collapse(s, policy, max_gap) for k, s in record.series.items()}
    shortest = min(len(s) for s in series.values())
    if shortest < min_samples:
        raise TooShort(f"{record.record_id}: {shortest} aligned samples < {min_samples}")
    return replace(record, series=series)


def record_paths(directory: Path, record_id: str) -> tuple[Path, Path, Path]:
    directory = Path(directory)
    return (
        directory / f"{record_id}.csv",
        directory / f"{record_id}.gps.csv",
        directory / f"{record_id}.json",
    )


def write_record(record: ActivityRecord, directory: Path) -> None:
    sensor_path, gps_path, meta_path = record_paths(directory, record.record_id)
    sensor_path.write_text(serialize_activity_csv(record))
    meta_path.write_text(serialize_metadata(record.meta))
    if record.gps is not None:
        gps_path.write_text(serialize_gps_csv(record.gps))


def load_record(
    directory: Path,
    record_id: str,
    policy: AlignPolicy = AlignPolicy.MEAN_PER_SECOND,
    *,
    min_samples: int = MIN_SAMPLES,
) -> ActivityRecord:
    """Read one record triple from ``directory`` and align it."""
    sensor_path, gps_path, meta_path = record_paths(directory, record_id)
    meta = parse_metadata(meta_path.read_text())
    if meta.record_id != record_id:
        raise InvalidRecord(f"{meta_path}: record_id {meta.record_id!r} != file stem {record_id!r}")
    record = parse_activity_csv(sensor_path.read_text(), meta)
    if gps_path.exists():
        record = replace(record, gps=parse_gps_csv(gps_path.read_text()))
    return align_series(record, policy, min_samples=min_samples)


def list_record_ids(directory: Path) -> list[str]:
    return sorted(p.stem for p in Path(directory).glob("*.json"))


def load_records(directory: Path, policy: AlignPolicy = AlignPolicy.MEAN_PER_SECOND) -> list[ActivityRecord]:
    ids = list_record_ids(directory)
    if not ids:
        raise InvalidRecord(f"no record metadata (*.json) found in {directory}")
    return [load_record(directory, rid, policy) for rid in ids]
