import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from runnerdna.errors import (
    DegeneratePooledVariance,
    EmptyMatrix,
    LengthMismatch,
    TooFewSamples,
    UnknownLabel,
)
from runnerdna.evaluation import (
    ConfusionMatrix,
    GroupSummary,
    accuracy,
    confusion_matrix,
    kappa,
    significance_tier,
    stratified_kfold,
    stratified_split,
    students_t,
    t_cdf,
    t_p_value,
)

CLASSES = ("Biking", "EBikeRiding", "Walking", "Running")
CLASS_SIZES = (32, 55, 45, 139)
# reference column-normalized confusion matrix, rows predicted, columns actual
REFERENCE_MATRIX = np.array([
    [0.625, 0.018, 0.0, 0.007],
    [0.219, 0.909, 0.0, 0.022],
    [0.062, 0.0, 0.905, 0.029],
    [0.094, 0.073, 0.095, 0.942],
])


def t_density(x, df):
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(logc - (df + 1) / 2 * math.log1p(x * x / df))


def two_sided_by_quadrature(t, df):
    tail, _ = quad(t_density, abs(t), math.inf, args=(df,), epsabs=1e-13)
    return 2 * tail


def reference_integer_matrix():
    return np.rint(REFERENCE_MATRIX * np.array(CLASS_SIZES)).astype(int)


class TestConfusion:
    def test_diagonal(self):
        truth = ["a", "b", "c", "b"]
        cm = confusion_matrix(truth, truth, ("a", "b", "c"))
        assert (cm.counts == np.diag([1, 2, 1])).all()

    def test_biking_column(self):
        preds = ["Biking"] * 20 + ["EBikeRiding"] * 7 + ["Walking"] * 2 + ["Running"] * 3
        cm = confusion_matrix(["Biking"] * 32, preds, CLASSES)
        col = cm.normalized()[:, 0]
        assert col.tolist() == [20 / 32, 7 / 32, 2 / 32, 3 / 32]
        assert np.all(np.abs(col - REFERENCE_MATRIX[:, 0]) <= 0.0005 + 1e-12)

    def test_hand_tabulated(self):
        cm = confusion_matrix(["x", "y", "y"], ["x", "x", "y"], ("x", "y"))
        # columns are truths: x -> x once; y -> x once, y -> y once
        assert cm.counts.tolist() == [[1, 1], [0, 1]]
        assert cm.normalized().tolist() == [[1.0, 0.5], [0.0, 0.5]]

    def test_empty_column_stays_zero(self):
        cm = confusion_matrix(["a"], ["b"], ("a", "b"))
        assert cm.normalized().tolist() == [[0.0, 0.0], [1.0, 0.0]]

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            confusion_matrix(["a"], [], ("a",))
        with pytest.raises(UnknownLabel):
            confusion_matrix(["a"], ["z"], ("a",))

    def test_csv_roundtrip(self):
        cm = ConfusionMatrix(CLASSES, reference_integer_matrix())
        back = ConfusionMatrix.from_csv(cm.to_csv())
        assert back.classes == cm.classes and (back.counts == cm.counts).all()


class TestAccuracy:
    def test_diagonal(self):
        assert accuracy(ConfusionMatrix(("a", "b"), [[3, 0], [0, 5]])) == 1.0

    def test_uniform(self):
        assert accuracy(ConfusionMatrix(CLASSES, np.full((4, 4), 7))) == 0.25

    def test_reference_matrix_weighted_trace(self):
        weighted = sum(REFERENCE_MATRIX[i, i] * n for i, n in enumerate(CLASS_SIZES)) / sum(CLASS_SIZES)
        assert weighted == pytest.approx(0.89173, abs=1e-5)
        cm = ConfusionMatrix(CLASSES, reference_integer_matrix())
        assert cm.counts.sum(axis=0).tolist() == list(CLASS_SIZES)
        assert accuracy(cm) == pytest.approx(weighted, abs=0.002)

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            accuracy(ConfusionMatrix(("a",), [[0]]))


class TestKappa:
    def test_diagonal(self):
        assert kappa(ConfusionMatrix(("a", "b", "c"), np.diag([4, 9, 2]))) == 1.0

    def test_two_by_two(self):
        assert kappa(ConfusionMatrix(("a", "b"), [[40, 10], [10, 40]])) == 0.6

    def test_independent(self):
        rng = np.random.default_rng(0)
        truth = rng.choice(list(CLASSES), 10_000, p=[0.1, 0.2, 0.2, 0.5])
        preds = rng.choice(list(CLASSES), 10_000, p=[0.25, 0.25, 0.25, 0.25])
        assert abs(kappa(confusion_matrix(list(truth), list(preds), CLASSES))) <= 0.03

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            kappa(ConfusionMatrix(("a",), [[0]]))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60), st.permutations(range(4)))
    def test_class_order_invariance(self, pairs, perm):
        truth = [CLASSES[t] for t, _ in pairs]
        preds = [CLASSES[p] for _, p in pairs]
        reordered = tuple(CLASSES[i] for i in perm)
        a = confusion_matrix(truth, preds, CLASSES)
        b = confusion_matrix(truth, preds, reordered)
        assert accuracy(a) == accuracy(b)
        assert kappa(a) == pytest.approx(kappa(b), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 9), min_size=3, max_size=3), min_size=3, max_size=3))
    def test_one_iff_diagonal(self, grid):
        counts = np.array(grid)
        if counts.sum() == 0:
            return
        cm = ConfusionMatrix(("a", "b", "c"), counts)
        diagonal = not (counts - np.diag(np.diag(counts))).any()
        assert (kappa(cm) == pytest.approx(1.0, abs=1e-12)) == (diagonal and len(np.flatnonzero(np.diag(counts))) > 1)


class TestStudentsT:
    def test_equal_means(self):
        r = students_t((1.0, 0.25, 10), (1.0, 0.5, 12))
        assert r.t == 0.0 and r.p == 1.0

    def test_reference_balance_rows(self):
        r = students_t((2.013, 0.521**2, 32), (1.995, 0.515**2, 55))
        assert abs(r.t - 0.159) <= 0.02
        r = students_t((1.995, 0.515**2, 55), (2.132, 0.715**2, 45))
        assert abs(r.t - (-1.091)) <= 0.05
        assert r.df == 98

    def test_hand_formula(self):
        # pooled variance (9*4 + 9*4)/18 = 4, se = sqrt(4 * 0.2) = sqrt(0.8)
        r = students_t((3.0, 4.0, 10), (1.0, 4.0, 10))
        assert r.t == pytest.approx(2 / math.sqrt(0.8))

    def test_group_summary_of(self):
        g = GroupSummary.of([1, 2, 3, 4])
        assert (g.mean, g.variance, g.n) == (2.5, pytest.approx(5 / 3), 4)

    def test_errors(self):
        with pytest.raises(DegeneratePooledVariance):
            students_t((1.0, 0.0, 5), (2.0, 0.0, 5))
        with pytest.raises(TooFewSamples):
            students_t((1.0, 1.0, 1), (2.0, 1.0, 5))

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-5, 5), st.floats(0.01, 4), st.integers(2, 200),
        st.floats(-5, 5), st.floats(0.01, 4), st.integers(2, 200),
    )
    def test_antisymmetry(self, m1, v1, n1, m2, v2, n2):
        a = students_t((m1, v1, n1), (m2, v2, n2))
        b = students_t((m2, v2, n2), (m1, v1, n1))
        assert a.t == pytest.approx(-b.t, abs=1e-12)
        assert a.p == pytest.approx(b.p, abs=1e-12)


class TestPValue:
    def test_zero(self):
        assert t_p_value(0.0, 7) == 1.0

    def test_critical_value_df10(self):
        p = t_p_value(2.228, 10)
        assert p == pytest.approx(two_sided_by_quadrature(2.228, 10), abs=1e-9)
        assert abs(p - 0.050) <= 0.001

    def test_normal_limit(self):
        p = t_p_value(1.96, 1e6)
        assert p == pytest.approx(math.erfc(1.96 / math.sqrt(2)), abs=1e-5)
        assert abs(p - 0.050) <= 0.001

    @pytest.mark.parametrize("t,df", [(0.5, 3), (-1.2, 20), (3.4, 98), (6.0, 40)])
    def test_quadrature_oracle(self, t, df):
        assert t_p_value(t, df) == pytest.approx(two_sided_by_quadrature(t, df), rel=1e-7, abs=1e-12)

    def test_cdf_symmetry(self):
        for t in (0.3, 1.7, 4.0):
            assert t_cdf(t, 9) + t_cdf(-t, 9) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 20), st.floats(0, 20), st.integers(1, 300))
    def test_monotone_in_abs_t(self, a, b, df):
        lo, hi = sorted((a, b))
        assert t_p_value(hi, df) <= t_p_value(lo, df) + 1e-15

    def test_tiers(self):
        assert significance_tier(0.005) == "p<0.01"
        assert significance_tier(0.03) == "p<0.05"
        assert significance_tier(0.07) == "p<0.10"
        assert significance_tier(0.2) == "n.s."


class TestSplits:
    def test_stratified_split(self):
        labels = ["a"] * 32 + ["b"] * 55 + ["c"] * 45 + ["d"] * 139
        train, test = stratified_split(labels, 0.2, 42)
        assert sorted(train + test) == list(range(271))
        per_class = {c: sum(labels[i] == c for i in test) for c in "abcd"}
        assert per_class == {"a": 6, "b": 11, "c": 9, "d": 28}
        assert stratified_split(labels, 0.2, 42) == (train, test)

    def test_kfold(self):
        labels = ["a"] * 10 + ["b"] * 7
        folds = stratified_kfold(labels, 3, 1)
        assert sorted(i for f in folds for i in f) == list(range(17))
        for f in folds:
            assert 3 <= sum(labels[i] == "a" for i in f) <= 4
