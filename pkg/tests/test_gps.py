import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from runnerdna.errors import NonPositiveInterval, TooShort
from runnerdna.gps import (
    EARTH_RADIUS_M,
    KINEMATIC_COLUMNS,
    drop_jitter,
    haversine_distance,
    haversine_velocity,
    point_acceleration,
    track_kinematics,
    wrap_longitude,
)
from runnerdna.ingest import Activity, GpsPoint
from runnerdna.synth import DEFAULT_PROFILES, StyleOffset, generate_record

from oracles import chord_distance, great_circle_arc

lats = st.floats(-89.0, 89.0)
lons = st.floats(-179.9, 179.9)


class TestVelocity:
    def test_identical_points(self):
        assert haversine_velocity(GpsPoint(10, 20, 0), GpsPoint(10, 20, 1)) == 0.0

    def test_one_degree_along_equator(self):
        v = haversine_velocity(GpsPoint(0, 0, 0), GpsPoint(0, 1, 3600))
        assert v == pytest.approx(great_circle_arc(1.0) / 3600, abs=1e-9)
        assert abs(v - 30.888) <= 0.01

    def test_one_degree_along_meridian(self):
        v = haversine_velocity(GpsPoint(0, 0, 0), GpsPoint(1, 0, 3600))
        assert abs(v - 30.888) <= 0.01

    def test_radius(self):
        assert EARTH_RADIUS_M == 6_371_000.0

    @pytest.mark.parametrize("dt", [0, -1])
    def test_non_positive_interval(self, dt):
        with pytest.raises(NonPositiveInterval):
            haversine_velocity(GpsPoint(0, 0, 10), GpsPoint(0, 1, 10 + dt))

    @settings(max_examples=100, deadline=None)
    @given(lats, lons, lats, lons)
    def test_matches_chord_oracle(self, a1, o1, a2, o2):
        d = haversine_distance(a1, o1, a2, o2)
        assert d == pytest.approx(chord_distance(a1, o1, a2, o2), rel=1e-6, abs=1e-3)

    @settings(max_examples=100, deadline=None)
    @given(lats, lons, lats, lons, st.floats(1.0, 100.0))
    def test_swap_symmetry(self, a1, o1, a2, o2, dt):
        v1 = haversine_velocity(GpsPoint(a1, o1, 0), GpsPoint(a2, o2, dt))
        v2 = haversine_velocity(GpsPoint(a2, o2, 0), GpsPoint(a1, o1, dt))
        assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-9)
        assert v1 >= 0

    @settings(max_examples=100, deadline=None)
    @given(lats, lons, lats, lons)
    def test_longitude_wrap(self, a1, o1, a2, o2):
        base = haversine_distance(a1, o1, a2, o2)
        assert haversine_distance(a1, o1 + 360.0, a2, o2) == pytest.approx(base, rel=1e-9, abs=1e-6)
        assert haversine_distance(a1, o1, a2, o2 - 360.0) == pytest.approx(base, rel=1e-9, abs=1e-6)

    def test_wrap_longitude(self):
        assert wrap_longitude(190.0) == -170.0
        assert wrap_longitude(-180.0) == -180.0
        assert wrap_longitude(540.0) == -180.0


class TestAcceleration:
    def test_examples(self):
        assert point_acceleration(0, 10, 0, 5) == 2.0
        assert point_acceleration(4, 4, 0, 3) == 0.0
        assert point_acceleration(8, 5, 0, 2) == -1.5

    def test_non_positive_interval(self):
        with pytest.raises(NonPositiveInterval):
            point_acceleration(1, 2, 3, 3)


class TestTrack:
    def test_stationary(self):
        track = [GpsPoint(45.0, 7.0, t) for t in range(5)]
        series, feats = track_kinematics(track)
        assert all(v == 0 for _, v in series.velocities)
        assert all(a == 0 for _, a in series.accelerations)
        assert all(v == 0 for v in feats.as_dict().values())

    def test_equator_constant_speed(self):
        track = [GpsPoint(0.0, 1e-4 * t, float(t)) for t in range(20)]
        series, feats = track_kinematics(track)
        step = great_circle_arc(1e-4)
        for _, v in series.velocities:
            assert v == pytest.approx(step, rel=1e-6)
        assert abs(feats.mean_velocity - 11.12) < 0.01
        assert feats.max_abs_acceleration < 1e-6
        assert len(series.velocities) == 19 and len(series.accelerations) == 18

    def test_synthetic_track_mean_velocity(self):
        rec = generate_record(Activity.RUNNING, DEFAULT_PROFILES[Activity.RUNNING], StyleOffset(), 120, seed=3)
        gps = rec.gps
        speeds = [
            chord_distance(a.lat, a.lon, b.lat, b.lon) / (b.timestamp - a.timestamp)
            for a, b in zip(gps, gps[1:])
        ]
        _, feats = track_kinematics(gps)
        assert feats.mean_velocity == pytest.approx(sum(speeds) / len(speeds), rel=1e-6)
        assert feats.max_velocity == pytest.approx(max(speeds), rel=1e-6)

    def test_signed_accelerations_and_stamps(self):
        # speeds 1, 3, 2 m/s along the equator
        step = great_circle_arc(1e-5)
        lon = [0.0, 1.0, 4.0, 6.0]
        track = [GpsPoint(0.0, 1e-5 * x, float(t)) for t, x in enumerate(lon)]
        series, feats = track_kinematics(track)
        assert [round(v / step, 6) for _, v in series.velocities] == [1.0, 3.0, 2.0]
        assert [t for t, _ in series.velocities] == [1.0, 2.0, 3.0]
        acc = [a / step for _, a in series.accelerations]
        assert acc == pytest.approx([2.0, -1.0])
        assert feats.mean_abs_acceleration == pytest.approx(1.5 * step)
        assert tuple(feats.as_dict()) == KINEMATIC_COLUMNS

    def test_too_short(self):
        with pytest.raises(TooShort):
            track_kinematics([GpsPoint(0, 0, 0), GpsPoint(0, 0, 1)])

    def test_non_increasing(self):
        with pytest.raises(NonPositiveInterval):
            track_kinematics([GpsPoint(0, 0, 0), GpsPoint(0, 0, 1), GpsPoint(0, 0, 1)])

    def test_jitter_guard_drops_jump(self):
        track = [GpsPoint(0.0, 1e-5 * t, float(t)) for t in range(6)]
        glitch = GpsPoint(0.01, 3e-5, 3.0)  # ~1.1 km off in one second
        noisy = track[:3] + [glitch] + track[4:]
        kept = drop_jitter(noisy)
        assert glitch not in kept and len(kept) == 5
        _, feats = track_kinematics(noisy)
        assert feats.max_velocity < 2.0
        _, raw = track_kinematics(noisy, max_speed=None)
        assert raw.max_velocity > 1000.0
