"""Per-axis statistical features and permutation-based feature ranking."""

from __future__ import annotations

import csv
import io
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dna import fit_polynomial_rmse
from .errors import KeyMismatch, KTooLarge, TooShort
from .ingest import SERIES_KEYS, ActivityRecord, Activity, Axis, Sensor, SensorAxisSeries, column_name

ENTROPY_BINS = 10
MAX_PERIOD_LAG = 10

FEATURE_NAMES: tuple[str, ...] = (
    "mean",
    "variance",
    "std",
    "min",
    "max",
    "range",
    "median",
    "q1",
    "q3",
    "iqr",
    "skewness",
    "kurtosis",
    "rms",
    "mad",
    "energy",
    "entropy",
    "zero_crossing_rate",
    "diff_crossing_rate",
    "autocorr_1",
    "autocorr_2",
    "autocorr_3",
    "autocorr_4",
    "autocorr_5",
    "peak_rate",
    "mean_abs_diff",
    "max_abs_diff",
    "trend_slope",
    "trend_rmse",
    "dominant_period",
    "outlier_fraction",
)

FEATURE_KEYS: tuple[tuple[Sensor, Axis, str], ...] = tuple(
    (s, a, f) for s, a in SERIES_KEYS for f in FEATURE_NAMES
)


def feature_column(key: tuple[Sensor, Axis, str]) -> str:
    """Flat column name such as ``acc_y_mean``."""
    sensor, axis, name = key
    return f"{column_name(sensor, axis)}_{name}"


FEATURE_COLUMNS: tuple[str, ...] = tuple(feature_column(k) for k in FEATURE_KEYS)


def zero_crossing_rate(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise TooShort("zero-crossing rate needs at least 2 samples")
    s = np.sign(x - x.mean())
    crossings = np.count_nonzero(s[:-1] * s[1:] < 0)
    return crossings / (len(x) - 1)


def shannon_entropy(values: Sequence[float], bins: int = ENTROPY_BINS) -> float:
    """Entropy in nats of an equal-width histogram spanning [min, max]."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise TooShort("entropy needs at least 2 samples")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return 0.0
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(int)
    np.clip(idx, 0, bins - 1, out=idx)
    p = np.bincount(idx, minlength=bins) / len(x)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _autocorr(centered: np.ndarray, denom: float, lag: int) -> float:
    if denom == 0.0 or lag >= len(centered):
        return 0.0
    return float(np.dot(centered[:-lag], centered[lag:]) / denom)


def summary_features(series: SensorAxisSeries | Sequence[float], min_samples: int = 30) -> dict[str, float]:
    """The fixed 30-entry feature menu for one aligned series.

    Zero-variance series get 0 for skewness, kurtosis, every autocorrelation
    and the dominant period.
    """
    x = np.asarray(series.values if isinstance(series, SensorAxisSeries) else series, dtype=float)
    n = len(x)
    if n < max(min_samples, 3):
        raise TooShort(f"summary features need at least {max(min_samples, 3)} samples, got {n}")
    mean = float(x.mean())
    c = x - mean
    m2 = float(np.mean(c**2))
    sd = float(np.sqrt(m2))
    if m2 > 0:
        skew = float(np.mean(c**3)) / m2**1.5
        kurt = float(np.mean(c**4)) / m2**2 - 3.0
    else:
        skew = kurt = 0.0
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    d = np.diff(x)
    ad = np.abs(d)
    denom = float(np.dot(c, c))
    acs = [_autocorr(c, denom, lag) for lag in range(1, MAX_PERIOD_LAG + 1)]
    period = float(np.argmax(acs) + 1) if denom > 0 else 0.0
    peaks = np.count_nonzero((x[1:-1] > x[:-2]) & (x[1:-1] > x[2:]))
    slope = float(np.polynomial.Polynomial.fit(np.arange(n), x, 1).convert().coef[-1]) if m2 > 0 else 0.0

    out = OrderedDict()
    out["mean"] = mean
    out["variance"] = m2
    out["std"] = sd
    out["min"] = float(x.min())
    out["max"] = float(x.max())
    out["range"] = out["max"] - out["min"]
    out["median"] = med
    out["q1"] = q1
    out["q3"] = q3
    out["iqr"] = q3 - q1
    out["skewness"] = skew
    out["kurtosis"] = kurt
    out["rms"] = float(np.sqrt(np.mean(x**2)))
    out["mad"] = float(np.mean(np.abs(c)))
    out["energy"] = float(np.mean(x**2))
    out["entropy"] = shannon_entropy(x, ENTROPY_BINS)
    out["zero_crossing_rate"] = zero_crossing_rate(x)
    out["diff_crossing_rate"] = zero_crossing_rate(d)
    for lag in range(1, 6):
        out[f"autocorr_{lag}"] = acs[lag - 1]
    out["peak_rate"] = peaks / n
    out["mean_abs_diff"] = float(ad.mean())
    out["max_abs_diff"] = float(ad.max())
    out["trend_slope"] = slope
    out["trend_rmse"] = fit_polynomial_rmse(x, 1)
    out["dominant_period"] = period
    out["outlier_fraction"] = float(np.count_nonzero(np.abs(c) > sd) / n) if sd > 0 else 0.0
    assert tuple(out) == FEATURE_NAMES
    return dict(out)


@dataclass(frozen=True)
class FeatureVector:
    record_id: str
    label: str
    features: Mapping[str, float]

    def keys(self) -> tuple[str, ...]:
        return tuple(self.features)

    def array(self, keys: Sequence[str] | None = None) -> np.ndarray:
        if keys is None:
            return np.fromiter(self.features.values(), dtype=float, count=len(self.features))
        try:
            return np.array([self.features[k] for k in keys], dtype=float)
        except KeyError as exc:
            raise KeyMismatch(f"{self.record_id}: missing feature {exc}") from None


def extract_feature_vector(record: ActivityRecord) -> FeatureVector:
    features: dict[str, float] = {}
    for sensor, axis in SERIES_KEYS:
        block = summary_features(record.series[(sensor, axis)])
        for name in FEATURE_NAMES:
            features[feature_column((sensor, axis, name))] = block[name]
    return FeatureVector(record.record_id, Activity(record.label).value, features)


@dataclass
class Dataset:
    """Design matrix with labels and the provenance of each row."""

    X: np.ndarray
    y: list[str]
    feature_keys: tuple[str, ...]
    record_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != len(self.y) or self.X.shape[1] != len(self.feature_keys):
            raise KeyMismatch(
                f"shape {self.X.shape} inconsistent with {len(self.y)} labels, {len(self.feature_keys)} keys"
            )
        self.y = [str(v) for v in self.y]
        self.feature_keys = tuple(self.feature_keys)
        if not self.record_ids:
            self.record_ids = [str(i) for i in range(len(self.y))]

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector], keys: Sequence[str] | None = None) -> "Dataset":
        if not vectors:
            raise KeyMismatch("no feature vectors")
        keys = tuple(keys) if keys is not None else vectors[0].keys()
        for v in vectors:
            if set(v.features) != set(keys):
                raise KeyMismatch(f"{v.record_id}: feature keys differ from the first vector")
        X = np.vstack([v.array(keys) for v in vectors])
        return cls(X, [v.label for v in vectors], keys, [v.record_id for v in vectors])

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = list(rows)
        return Dataset(self.X[rows], [self.y[i] for i in rows], self.feature_keys, [self.record_ids[i] for i in rows])

    def select(self, keys: Sequence[str]) -> "Dataset":
        idx = [self.feature_keys.index(k) for k in keys]
        return Dataset(self.X[:, idx], list(self.y), tuple(keys), list(self.record_ids))


def vectors_to_csv(vectors: Sequence[FeatureVector]) -> str:
    if not vectors:
        return ""
    keys = vectors[0].keys()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["record_id", "label", *keys])
    for v in vectors:
        if v.keys() != keys:
            raise KeyMismatch(f"{v.record_id}: feature keys differ from the first vector")
        writer.writerow([v.record_id, v.label, *(repr(float(x)) for x in v.features.values())])
    return buf.getvalue()


def vectors_from_csv(text: str) -> list[FeatureVector]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:2] != ["record_id", "label"]:
        raise KeyMismatch("feature CSV must start with record_id,label")
    keys = header[2:]
    return [
        FeatureVector(row[0], row[1], dict(zip(keys, (float(v) for v in row[2:]))))
        for row in reader
        if row
    ]


@dataclass(frozen=True)
class ImportanceRanking:
    scores: Mapping[str, float]
    permutations: int
    seed: int
    baseline: float = float("nan")


def mean_decrease_accuracy(
    forest,
    data: Dataset,
    permutations: int = 10,
    seed: int = 0,
    rng_factory: Callable[[Sequence[int]], object] = np.random.default_rng,
) -> ImportanceRanking:
    """OOB accuracy lost when one feature is shuffled among each tree's OOB rows.

    Each feature draws from its own generator seeded with ``[seed, feature_index]``
    so scores do not depend on evaluation order. Trees that never split on a
    feature are unaffected by shuffling it and reuse their baseline votes.
    """
    from .forest import oob_vote_matrix, oob_accuracy_from_votes  # local: avoid cycle

    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    if tuple(data.feature_keys) != tuple(forest.feature_keys):
        raise KeyMismatch("dataset features do not match the forest's feature keys")
    if len(data) == 0:
        raise KeyMismatch("empty dataset")
    if len(data) != forest.n_rows:
        from .errors import NotTrainingSet

        raise NotTrainingSet(f"forest was trained on {forest.n_rows} rows, got {len(data)}")

    y = forest.encode(data.y)
    X = data.X
    per_tree = [tree.predict_index(X[tree.oob_rows]) for tree in forest.trees]
    base_votes = oob_vote_matrix(forest, per_tree, len(data))
    baseline = oob_accuracy_from_votes(base_votes, y)

    scores: dict[str, float] = {}
    for j, key in enumerate(data.feature_keys):
        rng = rng_factory([seed, j])
        users = [t for t, tree in enumerate(forest.trees) if tree.uses_feature(j) and len(tree.oob_rows) > 1]
        if not users:
            scores[key] = 0.0
            continue
        total = 0.0
        for _ in range(permutations):
            votes = base_votes.copy()
            for t in users:
                tree = forest.trees[t]
                rows = tree.oob_rows
                Xp = X[rows].copy()
                Xp[:, j] = Xp[rng.permutation(len(rows)), j]
                pred = tree.predict_index(Xp)
                np.subtract.at(votes, (rows, per_tree[t]), 1)
                np.add.at(votes, (rows, pred), 1)
            total += oob_accuracy_from_votes(votes, y)
        scores[key] = baseline - total / permutations
    return ImportanceRanking(scores, permutations, seed, baseline)


def select_top_features(ranking: ImportanceRanking, k: int) -> list[str]:
    keys = list(ranking.scores)
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(keys):
        raise KTooLarge(f"k={k} exceeds {len(keys)} ranked features")
    order = sorted(range(len(keys)), key=lambda i: (-ranking.scores[keys[i]], i))
    return [keys[i] for i in order[:k]]
