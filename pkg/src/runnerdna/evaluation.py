"""Confusion matrices, accuracy, Cohen's kappa and Student's t-test."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .errors import (
    DegeneratePooledVariance,
    EmptyMatrix,
    LengthMismatch,
    TooFewSamples,
    UnknownLabel,
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[i, j]`` = items of true class ``j`` predicted as class ``i``.

    Columns are actual labels, rows are predictions.
    """

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError(f"counts shape {counts.shape} does not match {k} classes")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Column-normalized view; columns with no truths stay zero."""
        col = self.counts.sum(axis=0).astype(float)
        out = np.zeros(self.counts.shape)
        ok = col > 0
        out[:, ok] = self.counts[:, ok] / col[ok]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predicted", *(f"{c}_count" for c in self.classes), *(f"{c}_fraction" for c in self.classes)])
        norm = self.normalized()
        for i, c in enumerate(self.classes):
            w.writerow([c, *self.counts[i].tolist(), *(f"{v:.6f}" for v in norm[i])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        classes = tuple(r[0] for r in rows[1:] if r)
        k = len(classes)
        counts = np.array([[int(v) for v in r[1 : 1 + k]] for r in rows[1:] if r])
        return cls(classes, counts)


def confusion_matrix(truth: Sequence[str], preds: Sequence[str], classes: Sequence[str]) -> ConfusionMatrix:
    if len(truth) != len(preds):
        raise LengthMismatch(f"{len(truth)} truths vs {len(preds)} predictions")
    lookup = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, preds):
        if t not in lookup or p not in lookup:
            raise UnknownLabel(f"label {t if t not in lookup else p!r} not in {tuple(classes)}")
        counts[lookup[p], lookup[t]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa; 0 when chance agreement is already perfect."""
    n = cm.total
    if n == 0:
        raise EmptyMatrix("kappa of an empty confusion matrix")
    # integer numerator and denominator keep closed-form cases exact
    counts = cm.counts
    agree = int(np.trace(counts)) * n
    chance = int(np.dot(counts.sum(axis=1), counts.sum(axis=0)))
    if chance == n * n:
        return 0.0
    return (agree - chance) / (n * n - chance)


def t_cdf(t: float, df: float) -> float:
    """Student t CDF through the regularized incomplete beta function."""
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return float(1.0 - tail if t > 0 else tail)


def t_p_value(t: float, df: float) -> float:
    """Two-sided p-value, 2 * (1 - F(|t|))."""
    if df < 1:
        raise TooFewSamples(f"df must be >= 1, got {df}")
    if t == 0:
        return 1.0
    x = df / (df + t * t)
    # 2 * (1 - F(|t|)) equals I_x(df/2, 1/2) exactly; computing it directly keeps small p accurate
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, x))))


@dataclass(frozen=True)
class GroupSummary:
    mean: float
    variance: float
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "GroupSummary":
        x = np.asarray(values, dtype=float)
        if len(x) < 2:
            raise TooFewSamples(f"need at least 2 values per group, got {len(x)}")
        return cls(float(x.mean()), float(x.var(ddof=1)), len(x))

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    group1: GroupSummary
    group2: GroupSummary

    @property
    def significance(self) -> str:
        return significance_tier(self.p)


def significance_tier(p: float) -> str:
    if p < 0.01:
        return "p<0.01"
    if p < 0.05:
        return "p<0.05"
    if p < 0.10:
        return "p<0.10"
    return "n.s."


def students_t(g1: GroupSummary | tuple, g2: GroupSummary | tuple) -> TTestResult:
    """Independent two-sample t with pooled variance and n1 + n2 - 2 degrees of freedom.

    Groups are ``(mean, variance, n)``; the variance is the sample (n - 1) variance.
    """
    g1 = g1 if isinstance(g1, GroupSummary) else GroupSummary(*g1)
    g2 = g2 if isinstance(g2, GroupSummary) else GroupSummary(*g2)
    if g1.n < 2 or g2.n < 2:
        raise TooFewSamples(f"each group needs n >= 2 (got {g1.n}, {g2.n})")
    if g1.variance < 0 or g2.variance < 0:
        raise ValueError("variances must be non-negative")
    df = g1.n + g2.n - 2
    pooled = ((g1.n - 1) * g1.variance + (g2.n - 1) * g2.variance) / df
    if pooled <= 0:
        raise DegeneratePooledVariance("pooled variance is zero")
    se = math.sqrt(pooled * (1.0 / g1.n + 1.0 / g2.n))
    t = (g1.mean - g2.mean) / se
    return TTestResult(t, df, t_p_value(t, df), g1, g2)


def stratified_split(labels: Sequence[str], test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded per-class shuffle; each class with >= 2 items puts round(frac * n) (at least 1) in test."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for label in sorted(set(labels)):
        idx = np.array([i for i, v in enumerate(labels) if v == label])
        idx = idx[rng.permutation(len(idx))]
        n_test = 0 if len(idx) < 2 else max(1, int(round(test_fraction * len(idx))))
        test.extend(idx[:n_test].tolist())
        train.extend(idx[n_test:].tolist())
    return sorted(train), sorted(test)


def stratified_kfold(labels: Sequence[str], k: int, seed: int) -> list[list[int]]:
    """Assign rows to ``k`` folds, dealing each shuffled class round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for label in sorted(set(labels)):
        idx = np.array([i for i, v in enumerate(labels) if v == label])
        for pos, i in enumerate(idx[rng.permutation(len(idx))]):
            folds[(offset + pos) % k].append(int(i))
        offset += len(idx)
    return [sorted(f) for f in folds]
