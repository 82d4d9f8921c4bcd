"""The five interpretable movement indicators and their 0-5 cohort scaling.

==========  ==========================  ======================================
indicator   source series               statistic
==========  ==========================  ======================================
balance     orientation z               RMSE of a linear fit
stride      orientation x               approximate entropy
steer       linear acceleration x       RMSE of a cubic fit
stability   linear acceleration z       Gaussian NLL per sample
amplitude   accelerometer y (default)   Gaussian NLL per sample
==========  ==========================  ======================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateSeries, EmptyCohort, NonPositiveThreshold, SingularFit, TooShort
from .ingest import ActivityRecord, Axis, Sensor

INDICATORS = ("balance", "stride", "steer", "stability", "amplitude")
RAW_FIELDS = ("balance_rmse", "stride_apen", "steer_rmse", "stability_nll", "amplitude_nll")

AmplitudeSource = Literal["accelerometer", "linear_acceleration"]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def fit_polynomial_rmse(values: Sequence[float], degree: int) -> float:
    """Root-mean-square residual of a least-squares polynomial in the sample index."""
    y = np.asarray(values, dtype=float)
    n = len(y)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if n < degree + 2:
        raise TooShort(f"degree-{degree} fit needs at least {degree + 2} samples, got {n}")
    x = np.arange(n, dtype=float)
    # Polynomial.fit rescales the index to [-1, 1], which keeps the cubic well conditioned.
    try:
        poly = np.polynomial.Polynomial.fit(x, y, degree)
    except np.linalg.LinAlgError as exc:
        raise SingularFit(str(exc)) from None
    residual = y - poly(x)
    return float(math.sqrt(np.dot(residual, residual) / n))


def _phi(x: np.ndarray, m: int, r: float) -> float:
    emb = sliding_window_view(x, m)
    # Chebyshev distance between every pair of embedded vectors, one coordinate at a time
    dist = np.abs(emb[:, None, 0] - emb[None, :, 0])
    for k in range(1, m):
        np.maximum(dist, np.abs(emb[:, None, k] - emb[None, :, k]), out=dist)
    c = np.count_nonzero(dist <= r, axis=1) / len(emb)
    return float(np.mean(np.log(c)))


def approximate_entropy(values: Sequence[float], m: int = 2, r: float | None = None) -> float:
    """Approximate entropy with embedding dimension ``m`` and tolerance ``r``.

    ``r`` defaults to 0.2 times the population SD. Self-matches are counted,
    so every log argument is positive.
    """
    x = np.asarray(values, dtype=float)
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(x) < m + 2:
        raise TooShort(f"ApEn with m={m} needs at least {m + 2} samples, got {len(x)}")
    if r is None:
        r = 0.2 * float(np.std(x))
    if not r > 0:
        raise NonPositiveThreshold(f"ApEn threshold must be positive, got {r}")
    return max(0.0, _phi(x, m, r) - _phi(x, m + 1, r))


def gaussian_nll(values: Sequence[float]) -> float:
    """Total negative log-likelihood of the series under its own fitted normal."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise TooShort("Gaussian NLL needs at least 2 samples")
    mu = x.mean()
    var = float(np.mean((x - mu) ** 2))
    if var <= 0.0:
        raise DegenerateSeries("zero-variance series has no Gaussian likelihood")
    return float(np.sum(_HALF_LOG_2PI + 0.5 * math.log(var) + (x - mu) ** 2 / (2.0 * var)))


@dataclass(frozen=True)
class RawDna:
    balance_rmse: float
    stride_apen: float
    steer_rmse: float
    stability_nll: float
    amplitude_nll: float

    def __post_init__(self):
        vals = self.as_tuple()
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite indicator in {self}")
        if min(self.balance_rmse, self.stride_apen, self.steer_rmse) < 0:
            raise ValueError(f"negative RMSE/ApEn indicator in {self}")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in RAW_FIELDS)


@dataclass(frozen=True)
class RunnerDna:
    record_id: str
    raw: RawDna
    normalized: tuple[float, float, float, float, float]

    def __getitem__(self, indicator: str) -> float:
        return self.normalized[INDICATORS.index(indicator)]


def _per_sample_nll(values: np.ndarray, indicator: str) -> float:
    try:
        return gaussian_nll(values) / len(values)
    except DegenerateSeries as exc:
        raise DegenerateSeries(f"{indicator}: {exc}", indicator=indicator) from None


def compute_dna_raw(
    record: ActivityRecord,
    m: int = 2,
    r_factor: float = 0.2,
    amplitude_source: AmplitudeSource = "accelerometer",
) -> RawDna:
    if r_factor <= 0:
        raise NonPositiveThreshold(f"r_factor must be positive, got {r_factor}")
    stride_series = record.values(Sensor.ORIENTATION, Axis.X)
    sd = float(np.std(stride_series))
    # a constant series is perfectly regular; r = 0 would otherwise be rejected
    stride = approximate_entropy(stride_series, m, r_factor * sd) if sd > 0 else 0.0
    amp_sensor = {
        "accelerometer": Sensor.ACCELEROMETER,
        "linear_acceleration": Sensor.LINEAR_ACCELERATION,
    }[amplitude_source]
    return RawDna(
        balance_rmse=fit_polynomial_rmse(record.values(Sensor.ORIENTATION, Axis.Z), 1),
        stride_apen=stride,
        steer_rmse=fit_polynomial_rmse(record.values(Sensor.LINEAR_ACCELERATION, Axis.X), 3),
        stability_nll=_per_sample_nll(record.values(Sensor.LINEAR_ACCELERATION, Axis.Z), "stability"),
        amplitude_nll=_per_sample_nll(record.values(amp_sensor, Axis.Y), "amplitude"),
    )


def normalize_dna(cohort: Sequence[tuple[str, RawDna]]) -> list[RunnerDna]:
    """Min-max map each indicator onto [0, 5] across the cohort.

    An indicator with no spread maps every record to 2.5.
    """
    if not cohort:
        raise EmptyCohort("cannot normalize an empty cohort")
    raw = np.array([dna.as_tuple() for _, dna in cohort], dtype=float)
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    scaled = np.full_like(raw, 2.5)
    ok = span > 0
    scaled[:, ok] = np.clip(5.0 * (raw[:, ok] - lo[ok]) / span[ok], 0.0, 5.0)
    return [
        RunnerDna(rid, dna, tuple(float(v) for v in row))
        for (rid, dna), row in zip(cohort, scaled)
    ]
