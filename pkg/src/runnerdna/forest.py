"""Random-forest classifier grown from scratch.

CART trees on bootstrap samples, Gini splits at midpoints between distinct
values, and per-tree bootstrap bookkeeping for out-of-bag estimates. Tree
``t`` draws everything from seeds derived from ``params.seed + t``, so the
forest is the same however the trees are scheduled.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyData, KeyMismatch, NotTrainingSet, SingleClass, UnknownLabel
from .features import Dataset, FeatureVector

_SEED_MOD = 2**64


def bootstrap_sample(n: int, seed: int) -> np.ndarray:
    """``n`` uniform draws with replacement from ``range(n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed % _SEED_MOD)
    return rng.integers(0, n, size=n)


def oob_indices(bootstrap: np.ndarray, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[bootstrap] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: str | int = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if isinstance(self.features_per_split, str) and self.features_per_split != "sqrt":
            raise ValueError("features_per_split must be 'sqrt' or an integer")

    def mtry(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        k = int(self.features_per_split)
        if not 1 <= k <= n_features:
            raise ValueError(f"features_per_split={k} not in [1, {n_features}]")
        return k


@dataclass
class DecisionTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) weighted by bootstrap multiplicity
    bootstrap: np.ndarray
    n_rows: int
    oob_rows: np.ndarray = field(init=False, repr=False)
    leaf_class: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.oob_rows = oob_indices(self.bootstrap, self.n_rows)
        self.leaf_class = np.argmax(self.counts, axis=1)
        self._used = frozenset(int(f) for f in self.feature if f >= 0)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def uses_feature(self, j: int) -> bool:
        return j in self._used

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.arange(len(X))
        while active.size:
            f = self.feature[node[active]]
            inner = f >= 0
            active = active[inner]
            if not active.size:
                break
            f = f[inner]
            cur = node[active]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "bootstrap": self.bootstrap.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n_rows: int) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            counts=np.asarray(d["counts"], dtype=np.int64).reshape(len(d["feature"]), -1),
            bootstrap=np.asarray(d["bootstrap"], dtype=np.int64),
            n_rows=n_rows,
        )


def _best_split(xs: np.ndarray, ys: np.ndarray, n_classes: int, min_leaf: int):
    """Best Gini split of one feature, as (score, threshold) or None.

    ``score`` is sum(left_counts**2)/n_left + sum(right_counts**2)/n_right,
    which is maximal exactly where the weighted Gini impurity is minimal.
    """
    n = len(xs)
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    total = left[-1] + onehot[-1]
    right = total - left
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    valid = xs[:-1] < xs[1:]
    valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    score = np.einsum("ij,ij->i", left, left) / n_left + np.einsum("ij,ij->i", right, right) / n_right
    score[~valid] = -np.inf
    i = int(np.argmax(score))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(score[i]), float(thr)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    params: ForestParams,
    tree_seed: int,
) -> DecisionTree:
    n, d = X.shape
    boot = bootstrap_sample(n, tree_seed)
    rng = np.random.default_rng([tree_seed % _SEED_MOD, 1])
    mtry = params.mtry(d)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(boot), boot, 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        if (
            np.count_nonzero(c) < 2
            or (params.max_depth is not None and depth >= params.max_depth)
            or len(idx) < 2 * params.min_samples_leaf
        ):
            continue
        # visit features in random order until mtry non-constant ones are seen
        candidates = []
        for j in rng.permutation(d):
            col = X[idx, j]
            if col.min() < col.max():
                candidates.append(int(j))
                if len(candidates) == mtry:
                    break
        best = None
        for j in sorted(candidates):
            split = _best_split(X[idx, j], y[idx], n_classes, params.min_samples_leaf)
            if split is not None and (best is None or split[0] > best[0]):
                best = (split[0], j, split[1])
        if best is None:
            continue
        _, j, thr = best
        go_left = X[idx, j] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = j
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts).astype(np.int64),
        bootstrap=boot,
        n_rows=n,
    )


@dataclass
class Forest:
    params: ForestParams
    trees: list[DecisionTree]
    feature_keys: tuple[str, ...]
    classes: tuple[str, ...]
    n_rows: int
    metadata: dict = field(default_factory=dict)

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        try:
            return np.array([lookup[str(v)] for v in labels], dtype=np.int64)
        except KeyError as exc:
            raise UnknownLabel(f"label {exc} not among forest classes {self.classes}") from None

    def votes(self, X: np.ndarray) -> np.ndarray:
        """(rows, classes) matrix of tree vote counts."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_keys):
            raise KeyMismatch(f"expected {len(self.feature_keys)} features, got shape {X.shape}")
        out = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict_index(X)), 1)
        return out

    def predict_matrix(self, X: np.ndarray) -> tuple[list[str], np.ndarray]:
        v = self.votes(X)
        # argmax returns the first maximum, i.e. ties go to the earlier class
        labels = [self.classes[i] for i in np.argmax(v, axis=1)]
        return labels, v / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "format": "runnerdna-forest",
            "version": 1,
            "params": asdict(self.params),
            "feature_keys": list(self.feature_keys),
            "classes": list(self.classes),
            "n_rows": self.n_rows,
            "metadata": self.metadata,
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("format") != "runnerdna-forest":
            raise KeyMismatch("not a serialized forest")
        n_rows = int(d["n_rows"])
        return cls(
            params=ForestParams(**d["params"]),
            trees=[DecisionTree.from_dict(t, n_rows) for t in d["trees"]],
            feature_keys=tuple(d["feature_keys"]),
            classes=tuple(d["classes"]),
            n_rows=n_rows,
            metadata=dict(d.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def train_forest(
    data: Dataset,
    params: ForestParams = ForestParams(),
    classes: Sequence[str] | None = None,
    n_jobs: int = 1,
) -> Forest:
    """Fit ``params.n_trees`` CART trees, each on its own bootstrap sample.

    ``classes`` fixes the label order used for encoding and vote tie-breaks;
    by default the sorted distinct labels.
    """
    if len(data) == 0:
        raise EmptyData("no training rows")
    if len(data) < 2:
        raise EmptyData("need at least 2 training rows")
    present = sorted(set(data.y))
    if len(present) < 2:
        raise SingleClass(f"only one class present: {present}")
    if classes is None:
        classes = present
    classes = tuple(str(c) for c in classes)
    if len(set(classes)) != len(classes):
        raise ValueError("duplicate class names")
    forest = Forest(params, [], tuple(data.feature_keys), classes, len(data))
    y = forest.encode(data.y)
    X = np.ascontiguousarray(data.X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise KeyMismatch("training matrix contains non-finite values")
    params.mtry(X.shape[1])

    def grow(t: int) -> DecisionTree:
        return _grow_tree(X, y, len(classes), params, params.seed + t)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            forest.trees = list(pool.map(grow, range(params.n_trees)))
    else:
        forest.trees = [grow(t) for t in range(params.n_trees)]
    return forest


def predict(forest: Forest, fv: FeatureVector) -> tuple[str, dict[str, float]]:
    """Majority vote for one feature vector plus the per-class vote fractions."""
    if set(fv.features) != set(forest.feature_keys):
        raise KeyMismatch(f"{fv.record_id}: feature keys do not match the forest")
    labels, fractions = forest.predict_matrix(fv.array(forest.feature_keys)[None, :])
    return labels[0], dict(zip(forest.classes, (float(f) for f in fractions[0])))


def oob_vote_matrix(forest: Forest, per_tree: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Vote counts from trees on their own OOB rows; ``per_tree[t]`` are tree t's predictions there."""
    votes = np.zeros((n, len(forest.classes)), dtype=np.int64)
    for tree, pred in zip(forest.trees, per_tree):
        np.add.at(votes, (tree.oob_rows, pred), 1)
    return votes


def oob_accuracy_from_votes(votes: np.ndarray, y: np.ndarray) -> float:
    covered = votes.sum(axis=1) > 0
    if not covered.any():
        return float("nan")
    pred = np.argmax(votes[covered], axis=1)
    return float(np.mean(pred == y[covered]))


def oob_predictions(forest: Forest, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """OOB-voted class index per row (-1 where no tree left the row out) and the vote matrix."""
    if len(data) != forest.n_rows:
        raise NotTrainingSet(f"forest was trained on {forest.n_rows} rows, got {len(data)}")
    if tuple(data.feature_keys) != forest.feature_keys:
        raise KeyMismatch("dataset features do not match the forest's feature keys")
    per_tree = [tree.predict_index(data.X[tree.oob_rows]) for tree in forest.trees]
    votes = oob_vote_matrix(forest, per_tree, len(data))
    pred = np.where(votes.sum(axis=1) > 0, np.argmax(votes, axis=1), -1)
    return pred, votes


def oob_error(forest: Forest, data: Dataset) -> float:
    """Misclassification rate over rows with at least one OOB tree (NaN if none)."""
    pred, _ = oob_predictions(forest, data)
    covered = pred >= 0
    if not covered.any():
        return float("nan")
    y = forest.encode(data.y)
    return float(np.mean(pred[covered] != y[covered]))
