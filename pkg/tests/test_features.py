import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from runnerdna.errors import KeyMismatch, KTooLarge, TooShort
from runnerdna.features import (
    FEATURE_COLUMNS,
    FEATURE_NAMES,
    Dataset,
    ImportanceRanking,
    extract_feature_vector,
    mean_decrease_accuracy,
    select_top_features,
    shannon_entropy,
    summary_features,
    vectors_from_csv,
    vectors_to_csv,
    zero_crossing_rate,
)
from runnerdna.forest import ForestParams, train_forest
from runnerdna.ingest import SERIES_KEYS, Activity, Axis, Sensor, align_series, parse_activity_csv, serialize_activity_csv
from runnerdna.synth import DEFAULT_PROFILES, StyleOffset, generate_record

from conftest import make_record
from oracles import histogram_entropy, streaming_mean


class TestZeroCrossing:
    def test_alternating(self):
        assert zero_crossing_rate([-1, 1, -1, 1]) == 1.0

    def test_ramp(self):
        # centered: [-1.5, -0.5, 0.5, 1.5], one crossing out of three transitions
        assert zero_crossing_rate([1, 2, 3, 4]) == pytest.approx(1 / 3)

    def test_constant(self):
        assert zero_crossing_rate([5, 5, 5]) == 0.0

    def test_exact_zero_is_not_crossing(self):
        # centered [-1, 0, 1]
        assert zero_crossing_rate([1, 2, 3]) == 0.0

    def test_too_short(self):
        with pytest.raises(TooShort):
            zero_crossing_rate([1.0])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=50))
    def test_range(self, x):
        assert 0.0 <= zero_crossing_rate(x) <= 1.0


class TestEntropy:
    def test_constant(self):
        assert shannon_entropy([2.0] * 10, 7) == 0.0

    def test_two_bins(self):
        assert shannon_entropy([0, 0, 1, 1], 2) == pytest.approx(math.log(2))

    def test_uniform_sample(self):
        x = np.random.default_rng(0).uniform(size=1000)
        h = shannon_entropy(x, 10)
        assert h == pytest.approx(histogram_entropy(x.tolist(), 10), abs=1e-12)
        assert abs(h - math.log(10)) < 0.05

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=50), st.integers(2, 12))
    def test_bounds(self, x, bins):
        h = shannon_entropy(x, bins)
        assert -1e-12 <= h <= math.log(bins) + 1e-12


class TestSummary:
    def test_constant(self):
        f = summary_features([4.0] * 30)
        assert f["mean"] == 4.0 and f["variance"] == 0.0
        assert f["min"] == f["max"] == 4.0 and f["range"] == 0.0
        assert f["entropy"] == 0.0 and f["zero_crossing_rate"] == 0.0
        assert f["skewness"] == 0.0 and f["kurtosis"] == 0.0
        assert all(f[f"autocorr_{k}"] == 0.0 for k in range(1, 6))
        assert all(math.isfinite(v) for v in f.values())

    def test_small_hand_arithmetic(self):
        f = summary_features([1, 2, 3, 4, 5], min_samples=5)
        assert f["mean"] == 3 and f["variance"] == 2
        assert f["min"] == 1 and f["max"] == 5 and f["range"] == 4 and f["median"] == 3
        assert f["trend_slope"] == pytest.approx(1.0)
        assert f["trend_rmse"] == pytest.approx(0.0, abs=1e-12)
        assert f["mean_abs_diff"] == 1.0 and f["max_abs_diff"] == 1.0

    def test_default_minimum(self):
        with pytest.raises(TooShort):
            summary_features(np.arange(29.0))

    def test_fixed_order_and_count(self):
        f = summary_features(np.random.default_rng(1).normal(size=50))
        assert tuple(f) == FEATURE_NAMES
        assert len(f) == 30

    def test_gaussian_law_of_large_numbers(self):
        f = summary_features(np.random.default_rng(2).standard_normal(10_000))
        assert abs(f["mean"]) < 0.05
        assert abs(f["variance"] - 1) < 0.1

    def test_known_shape_values(self):
        x = np.array([0.0, 1.0] * 20)
        f = summary_features(x)
        assert f["autocorr_1"] == pytest.approx(-39 / 40)
        assert f["autocorr_2"] == pytest.approx(38 / 40)
        assert f["dominant_period"] == 2.0
        assert f["zero_crossing_rate"] == 1.0
        assert f["peak_rate"] == pytest.approx(19 / 40)
        assert f["outlier_fraction"] == 0.0
        assert f["energy"] == pytest.approx(0.5)
        assert f["rms"] == pytest.approx(math.sqrt(0.5))

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            x = rng.gamma(2.0, size=60)
            a, b = summary_features(x), summary_features(2.5 * x)
            for name in ("zero_crossing_rate", "skewness", "kurtosis", "entropy"):
                assert b[name] == pytest.approx(a[name], abs=1e-9)


class TestFeatureVector:
    def test_length_540(self):
        fv = extract_feature_vector(make_record(n=40))
        assert len(fv.features) == 540
        assert tuple(fv.features) == FEATURE_COLUMNS
        assert all(math.isfinite(v) for v in fv.features.values())

    def test_constant_blocks_identical(self):
        rec = make_record({k: np.full(35, 1.5) for k in SERIES_KEYS}, n=35)
        vals = np.array(list(extract_feature_vector(rec).features.values())).reshape(18, 30)
        assert (vals == vals[0]).all()

    def test_composition_streaming_mean(self):
        rec = generate_record(Activity.WALKING, DEFAULT_PROFILES[Activity.WALKING], StyleOffset(), 90, seed=7)
        fv = extract_feature_vector(rec)
        expected = streaming_mean(rec.values(Sensor.ACCELEROMETER, Axis.Y).tolist())
        assert fv.features["acc_y_mean"] == pytest.approx(expected, rel=1e-12)

    def test_row_order_invariance(self):
        rec = make_record(n=40, seed=5)
        lines = serialize_activity_csv(rec).splitlines()
        body = lines[1:]
        random.Random(0).shuffle(body)
        shuffled = parse_activity_csv("\n".join([lines[0], *body]) + "\n", rec.meta)
        assert extract_feature_vector(align_series(shuffled)) == extract_feature_vector(align_series(rec))

    def test_csv_roundtrip(self):
        vs = [extract_feature_vector(make_record(n=32, seed=s, record_id=f"r{s}")) for s in range(3)]
        back = vectors_from_csv(vectors_to_csv(vs))
        assert back == vs
        header = vectors_to_csv(vs).splitlines()[0].split(",")
        assert len(header) == 542


def _importance_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    X = np.column_stack([y.astype(float), rng.normal(size=n), rng.normal(size=n)])
    return Dataset(X, [f"c{v}" for v in y], ("label_copy", "noise_a", "noise_b"))


class _IdentityRng:
    def permutation(self, n):
        return np.arange(n)


@pytest.fixture(scope="module")
def fitted():
    data = _importance_data()
    forest = train_forest(data, ForestParams(n_trees=60, seed=3, features_per_split=3))
    return forest, data


class TestImportance:
    def test_label_copy_ranks_first(self, fitted):
        forest, data = fitted
        ranking = mean_decrease_accuracy(forest, data, permutations=20, seed=1)
        assert select_top_features(ranking, 1) == ["label_copy"]
        assert ranking.scores["label_copy"] > 0.3
        assert abs(ranking.scores["noise_a"]) <= 0.05
        assert abs(ranking.scores["noise_b"]) <= 0.05

    def test_identity_permutation_scores_zero(self, fitted):
        forest, data = fitted
        ranking = mean_decrease_accuracy(forest, data, 3, 0, rng_factory=lambda seed: _IdentityRng())
        assert all(v == 0.0 for v in ranking.scores.values())

    def test_never_exceeds_baseline(self, fitted):
        forest, data = fitted
        ranking = mean_decrease_accuracy(forest, data, 5, 2)
        assert all(v <= ranking.baseline for v in ranking.scores.values())

    def test_deterministic(self, fitted):
        forest, data = fitted
        assert mean_decrease_accuracy(forest, data, 4, 9) == mean_decrease_accuracy(forest, data, 4, 9)

    def test_key_mismatch(self, fitted):
        forest, data = fitted
        other = Dataset(data.X, data.y, ("a", "b", "c"))
        with pytest.raises(KeyMismatch):
            mean_decrease_accuracy(forest, other, 2, 0)


class TestSelectTop:
    def test_tie_broken_by_key_order(self):
        r = ImportanceRanking({"a": 0.3, "b": 0.1, "c": 0.3}, 1, 0)
        assert select_top_features(r, 2) == ["a", "c"]

    def test_select_all(self):
        r = ImportanceRanking({"a": 0.1, "b": 0.5, "c": 0.3}, 1, 0)
        assert select_top_features(r, 3) == ["b", "c", "a"]

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            select_top_features(ImportanceRanking({"a": 0.1}, 1, 0), 2)
