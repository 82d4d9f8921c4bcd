"""Seeded synthetic sensor sessions for desk-scale testing.

Every series is a gait sinusoid scaled by the activity profile and the
volunteer's style, plus independent Gaussian noise. GPS tracks advance at the
profile speed with per-second jitter. All randomness flows from
``np.random.SeedSequence([seed, stream, index])`` so any record can be
regenerated in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DurationTooShort, InvalidSpec
from .gps import EARTH_RADIUS_M
from .ingest import (
    SERIES_KEYS,
    Activity,
    ActivityRecord,
    Axis,
    GpsPoint,
    Sensor,
    SensorAxisSeries,
    Sex,
    VolunteerProfile,
    parse_timestamp,
    write_record,
)

_STYLE_STREAM = 1
_RECORD_STREAM = 2
_VOLUNTEER_STREAM = 3

START_TIME = parse_timestamp("20191220 08:00:00")
ORIGIN = (30.52, 114.40)  # lat, lon of the synthetic test ground


@dataclass(frozen=True)
class ActivityProfile:
    gait_frequency: float  # Hz
    vertical_amplitude: float  # m/s^2
    sway_amplitude: float  # degrees
    noise_sd: Mapping[Sensor, float]
    base_speed: float  # m/s
    speed_jitter_sd: float  # m/s
    session_distance: float = 800.0  # m

    def __post_init__(self):
        scalars = (self.gait_frequency, self.vertical_amplitude, self.sway_amplitude,
                   self.base_speed, self.speed_jitter_sd, self.session_distance)
        if min(scalars) < 0 or min(self.noise_sd.values(), default=0.0) < 0:
            raise InvalidSpec("profile parameters must be non-negative")


def _noise(acc: float, lacc: float, grav: float, mag: float, ori: float, gyr: float) -> dict[Sensor, float]:
    return {
        Sensor.ACCELEROMETER: acc,
        Sensor.LINEAR_ACCELERATION: lacc,
        Sensor.GRAVITY: grav,
        Sensor.MAGNETIC: mag,
        Sensor.ORIENTATION: ori,
        Sensor.GYROSCOPE: gyr,
    }


DEFAULT_PROFILES: dict[Activity, ActivityProfile] = {
    Activity.WALKING: ActivityProfile(1.8, 2.4, 4.0, _noise(0.15, 0.9, 0.05, 1.0, 1.2, 0.08), 1.4, 0.15),
    Activity.RUNNING: ActivityProfile(2.8, 6.0, 7.0, _noise(0.3, 1.8, 0.08, 1.5, 2.2, 0.15), 3.3, 0.3),
    Activity.BIKING: ActivityProfile(1.2, 1.6, 2.6, _noise(0.15, 0.7, 0.05, 1.0, 1.0, 0.06), 5.0, 0.6, 2000.0),
    Activity.EBIKE_RIDING: ActivityProfile(0.3, 1.0, 1.6, _noise(0.15, 0.8, 0.05, 1.0, 0.9, 0.05), 7.0, 0.8, 2000.0),
}

REFERENCE_COUNTS: dict[Activity, int] = {
    Activity.BIKING: 32,
    Activity.EBIKE_RIDING: 55,
    Activity.WALKING: 45,
    Activity.RUNNING: 139,
}
REFERENCE_VOLUNTEERS = 33
REFERENCE_RUNNERS = 20


@dataclass(frozen=True)
class StyleOffset:
    """Per-volunteer multipliers applied on top of an activity profile."""

    amplitude: float = 1.0
    sway: float = 1.0
    noise: float = 1.0
    speed: float = 1.0

    def __post_init__(self):
        for name in ("amplitude", "sway", "noise", "speed"):
            v = getattr(self, name)
            if not 0.5 <= v <= 2.0:
                raise InvalidSpec(f"style multiplier {name}={v} outside [0.5, 2.0]")


def draw_style(rng: np.random.Generator, sex: Sex | None = None, spread: float = 0.22) -> StyleOffset:
    mult = np.exp(rng.normal(0.0, spread, size=4))
    if sex is Sex.MALE:
        mult[0] *= 1.08
    return StyleOffset(*(float(np.clip(m, 0.5, 2.0)) for m in mult))


def _rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed % 2**63, stream, index]))


def _track(
    rng: np.random.Generator,
    duration_s: int,
    speed: float,
    jitter: float,
    start_time: float,
) -> tuple[GpsPoint, ...]:
    lat0 = ORIGIN[0] + rng.uniform(-0.02, 0.02)
    lon0 = ORIGIN[1] + rng.uniform(-0.02, 0.02)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    v = np.maximum(0.0, speed + rng.normal(0.0, jitter, size=duration_s - 1)) if jitter > 0 else np.full(duration_s - 1, speed)
    turn = np.cumsum(rng.normal(0.0, 0.02, size=duration_s - 1)) + heading
    north = np.concatenate([[0.0], np.cumsum(v * np.cos(turn))])
    east = np.concatenate([[0.0], np.cumsum(v * np.sin(turn))])
    lat = lat0 + np.degrees(north / EARTH_RADIUS_M)
    lon = lon0 + np.degrees(east / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return tuple(GpsPoint(float(a), float(b), start_time + i) for i, (a, b) in enumerate(zip(lat, lon)))


def generate_record(
    label: Activity,
    profile: ActivityProfile,
    style: StyleOffset,
    duration_s: int,
    seed: int,
    *,
    record_id: str = "synthetic",
    volunteer: VolunteerProfile | None = None,
    start_time: float = START_TIME,
    record_jitter: float = 0.08,
) -> ActivityRecord:
    """One 1 Hz session of ``duration_s`` seconds with a matching GPS track."""
    if duration_s < 60:
        raise DurationTooShort(f"duration {duration_s} s < 60 s")
    rng = _rng(seed, _RECORD_STREAM, 0)
    if volunteer is None:
        volunteer = VolunteerProfile("synthetic", Sex.FEMALE, 165.0, 55.0)

    session = np.exp(rng.normal(0.0, record_jitter, size=2)) if record_jitter > 0 else np.ones(2)
    vert = profile.vertical_amplitude * style.amplitude * session[0]
    sway = profile.sway_amplitude * style.sway * session[1]
    t = np.arange(duration_s, dtype=float)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    w = 2.0 * math.pi * profile.gait_frequency
    g = np.sin(w * t + phase)
    gq = np.cos(w * t + phase)

    def noise(sensor: Sensor) -> np.ndarray:
        sd = profile.noise_sd.get(sensor, 0.0) * style.noise
        return rng.normal(0.0, sd, size=duration_s) if sd > 0 else np.zeros(duration_s)

    # draw order below is fixed; changing it changes every cohort
    lacc = {
        Axis.X: 0.4 * vert * gq + noise(Sensor.LINEAR_ACCELERATION),
        Axis.Y: 1.0 * vert * g + noise(Sensor.LINEAR_ACCELERATION),
        Axis.Z: 0.5 * vert * gq + noise(Sensor.LINEAR_ACCELERATION),
    }
    grav = {
        Axis.X: 0.8 + 0.05 * sway * gq + noise(Sensor.GRAVITY),
        Axis.Y: 9.7 + 0.02 * sway * g + noise(Sensor.GRAVITY),
        Axis.Z: 1.2 + 0.05 * sway * g + noise(Sensor.GRAVITY),
    }
    acc = {a: lacc[a] + grav[a] + noise(Sensor.ACCELEROMETER) for a in Axis}
    mag = {
        Axis.X: -20.8 + 0.5 * sway * g + noise(Sensor.MAGNETIC),
        Axis.Y: -34.7 + 0.5 * sway * gq + noise(Sensor.MAGNETIC),
        Axis.Z: -38.8 + 0.3 * sway * g + noise(Sensor.MAGNETIC),
    }
    ori = {
        Axis.X: 180.0 + sway * gq + noise(Sensor.ORIENTATION),
        Axis.Y: -80.0 + 0.5 * sway * g + noise(Sensor.ORIENTATION),
        Axis.Z: 10.0 + sway * g + noise(Sensor.ORIENTATION),
    }
    gyr = {
        Axis.X: 0.05 * vert * gq + noise(Sensor.GYROSCOPE),
        Axis.Y: 0.03 * vert * g + noise(Sensor.GYROSCOPE),
        Axis.Z: 0.05 * vert * g + noise(Sensor.GYROSCOPE),
    }
    by_sensor = {
        Sensor.ACCELEROMETER: acc,
        Sensor.LINEAR_ACCELERATION: lacc,
        Sensor.GRAVITY: grav,
        Sensor.MAGNETIC: mag,
        Sensor.ORIENTATION: ori,
        Sensor.GYROSCOPE: gyr,
    }
    ts = start_time + t
    series = {(s, a): SensorAxisSeries(s, a, ts, by_sensor[s][a]) for s, a in SERIES_KEYS}
    gps = _track(rng, duration_s, profile.base_speed * style.speed, profile.speed_jitter_sd, start_time)
    return ActivityRecord(record_id, Activity(label), volunteer, series, gps)


@dataclass(frozen=True)
class CohortSpec:
    counts: Mapping[Activity, int] = field(default_factory=lambda: dict(REFERENCE_COUNTS))
    n_volunteers: int = REFERENCE_VOLUNTEERS
    n_runners: int | None = None

    def __post_init__(self):
        if not self.counts or any(v < 1 for v in self.counts.values()):
            raise InvalidSpec("every activity count must be positive")
        if self.n_volunteers < 2:
            raise InvalidSpec("need at least 2 volunteers")
        runners = self.runners
        if not 1 <= runners <= self.n_volunteers:
            raise InvalidSpec(f"n_runners={runners} not in [1, {self.n_volunteers}]")

    @property
    def runners(self) -> int:
        if self.n_runners is not None:
            return self.n_runners
        return min(REFERENCE_RUNNERS, self.n_volunteers - 1)


def reference_cohort_spec() -> CohortSpec:
    return CohortSpec(dict(REFERENCE_COUNTS), REFERENCE_VOLUNTEERS, REFERENCE_RUNNERS)


def _volunteer(seed: int, index: int) -> VolunteerProfile:
    rng = _rng(seed, _VOLUNTEER_STREAM, index)
    sex = Sex.MALE if rng.random() < 0.5 else Sex.FEMALE
    if sex is Sex.MALE:
        height, weight = rng.uniform(167, 180), rng.uniform(53, 76)
    else:
        height, weight = rng.uniform(155, 167), rng.uniform(45, 67)
    return VolunteerProfile(f"v{index + 1:02d}", sex, round(float(height), 1), round(float(weight), 1))


def session_duration(profile: ActivityProfile, style: StyleOffset) -> int:
    speed = max(profile.base_speed * style.speed, 0.1)
    return max(60, int(round(profile.session_distance / speed)))


def generate_cohort(
    spec: CohortSpec,
    seed: int,
    profiles: Mapping[Activity, ActivityProfile] | None = None,
    duration_s: int | None = None,
) -> list[ActivityRecord]:
    """Records for every activity in ``spec.counts``, in activity then index order.

    Running sessions go round-robin to the first ``spec.runners`` volunteers;
    other activities go round-robin to the remaining volunteers (or to all of
    them when every volunteer is a runner).
    """
    profiles = dict(DEFAULT_PROFILES if profiles is None else profiles)
    volunteers = [_volunteer(seed, i) for i in range(spec.n_volunteers)]
    styles = [draw_style(_rng(seed, _STYLE_STREAM, i), v.sex) for i, v in enumerate(volunteers)]
    runners = list(range(spec.runners))
    others = list(range(spec.runners, spec.n_volunteers)) or list(range(spec.n_volunteers))

    records: list[ActivityRecord] = []
    other_turn = 0
    for activity in Activity:
        count = spec.counts.get(activity, 0)
        if count == 0:
            continue
        if activity not in profiles:
            raise InvalidSpec(f"no profile for {activity.value}")
        for k in range(count):
            if activity is Activity.RUNNING:
                v = runners[k % len(runners)]
            else:
                v = others[other_turn % len(others)]
                other_turn += 1
            index = len(records)
            profile = profiles[activity]
            dur = duration_s if duration_s is not None else session_duration(profile, styles[v])
            records.append(
                generate_record(
                    activity,
                    profile,
                    styles[v],
                    dur,
                    seed=int(np.random.SeedSequence([seed % 2**63, _RECORD_STREAM, index]).generate_state(1)[0]),
                    record_id=f"r{index + 1:04d}",
                    volunteer=volunteers[v],
                    start_time=START_TIME + 3600.0 * index,
                )
            )
    return records


def write_cohort(records: Sequence[ActivityRecord], directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for r in records:
        write_record(r, directory)
    return sorted(directory.glob("*.json"))
