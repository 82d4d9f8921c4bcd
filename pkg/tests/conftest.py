import numpy as np
import pytest

from runnerdna.ingest import (
    SERIES_KEYS,
    Activity,
    ActivityRecord,
    RecordMeta,
    SensorAxisSeries,
    Sex,
    VolunteerProfile,
)
from runnerdna.synth import generate_cohort, reference_cohort_spec

T0 = 1576800000.0  # 2019-12-20 00:00:00 UTC


@pytest.fixture
def volunteer():
    return VolunteerProfile("v01", Sex.FEMALE, 160.0, 50.0)


@pytest.fixture
def meta(volunteer):
    return RecordMeta("rec1", Activity.BIKING, volunteer)


def make_record(columns=None, n=40, record_id="rec", label=Activity.RUNNING, seed=0, gps=None):
    """Record with seeded noise in every series; ``columns`` overrides chosen (sensor, axis) values."""
    rng = np.random.default_rng(seed)
    columns = columns or {}
    ts = T0 + np.arange(n, dtype=float)
    series = {}
    for key in SERIES_KEYS:
        values = columns.get(key)
        if values is None:
            values = rng.normal(0.0, 1.0, n)
        series[key] = SensorAxisSeries(key[0], key[1], ts, np.asarray(values, dtype=float))
    vol = VolunteerProfile("v01", Sex.MALE, 175.0, 70.0)
    return ActivityRecord(record_id, label, vol, series, gps)


@pytest.fixture(scope="session")
def reference_cohort():
    return generate_cohort(reference_cohort_spec(), 42)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep
