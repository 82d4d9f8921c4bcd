"""Velocity and acceleration from GPS fixes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NonPositiveInterval, TooShort
from .ingest import GpsPoint

EARTH_RADIUS_M = 6_371_000.0
MAX_PLAUSIBLE_SPEED = 70.0  # m/s; faster implied jumps are positioning glitches

KINEMATIC_COLUMNS = (
    "mean_velocity",
    "max_velocity",
    "velocity_sd",
    "mean_abs_acceleration",
    "max_abs_acceleration",
)


def wrap_longitude(lon: float) -> float:
    """Map any longitude onto [-180, 180)."""
    return (lon + 180.0) % 360.0 - 180.0


def haversine_distance(lat1: float, lon1: float, lat2: float, lon2: float, radius: float = EARTH_RADIUS_M) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs in degrees."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dlat = phi2 - phi1
    dlon = math.radians(wrap_longitude(lon2) - wrap_longitude(lon1))
    h = math.sin(dlat / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * radius * math.asin(math.sqrt(min(1.0, h)))


def haversine_velocity(p1: GpsPoint, p2: GpsPoint, radius: float = EARTH_RADIUS_M) -> float:
    dt = p2.timestamp - p1.timestamp
    if dt <= 0:
        raise NonPositiveInterval(f"fixes must move forward in time (dt={dt})")
    return haversine_distance(p1.lat, p1.lon, p2.lat, p2.lon, radius) / dt


def point_acceleration(v1: float, v2: float, t1: float, t2: float) -> float:
    if t2 <= t1:
        raise NonPositiveInterval(f"t2 must exceed t1 (t1={t1}, t2={t2})")
    return (v2 - v1) / (t2 - t1)


@dataclass(frozen=True)
class KinematicSeries:
    velocities: tuple[tuple[float, float], ...]  # (timestamp, m/s)
    accelerations: tuple[tuple[float, float], ...]  # (timestamp, m/s^2)
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        if len(self.accelerations) != max(0, len(self.velocities) - 1):
            raise ValueError("need exactly one acceleration per consecutive velocity pair")


@dataclass(frozen=True)
class KinematicFeatures:
    mean_velocity: float
    max_velocity: float
    velocity_sd: float
    mean_abs_acceleration: float
    max_abs_acceleration: float

    def as_dict(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in KINEMATIC_COLUMNS}


def drop_jitter(track: Sequence[GpsPoint], max_speed: float = MAX_PLAUSIBLE_SPEED) -> list[GpsPoint]:
    """Drop fixes whose implied speed from the last kept fix exceeds ``max_speed``."""
    if not track:
        return []
    kept = [track[0]]
    for p in track[1:]:
        if haversine_velocity(kept[-1], p) <= max_speed:
            kept.append(p)
    return kept


def track_kinematics(
    track: Sequence[GpsPoint],
    max_speed: float | None = MAX_PLAUSIBLE_SPEED,
) -> tuple[KinematicSeries, KinematicFeatures]:
    """Pairwise velocities, then pairwise accelerations, and their summary.

    Velocity ``i`` is stamped at the later fix of its pair; acceleration ``i``
    uses the stamps of velocities ``i`` and ``i + 1``.
    """
    track = list(track)
    if len(track) < 3:
        raise TooShort(f"need at least 3 GPS fixes, got {len(track)}")
    for a, b in zip(track, track[1:]):
        if b.timestamp <= a.timestamp:
            raise NonPositiveInterval("GPS timestamps must be strictly increasing")
    if max_speed is not None:
        track = drop_jitter(track, max_speed)
        if len(track) < 3:
            raise TooShort(f"only {len(track)} GPS fixes left after dropping jumps")

    vel = [(b.timestamp, haversine_velocity(a, b)) for a, b in zip(track, track[1:])]
    acc = [
        (t2, point_acceleration(v1, v2, t1, t2))
        for (t1, v1), (t2, v2) in zip(vel, vel[1:])
    ]
    v = np.array([x for _, x in vel])
    a = np.abs(np.array([x for _, x in acc]))
    features = KinematicFeatures(
        mean_velocity=float(v.mean()),
        max_velocity=float(v.max()),
        velocity_sd=float(v.std()),
        mean_abs_acceleration=float(a.mean()),
        max_abs_acceleration=float(a.max()),
    )
    return KinematicSeries(tuple(vel), tuple(acc)), features
