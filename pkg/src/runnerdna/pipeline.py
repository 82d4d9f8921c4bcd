"""Assemble model inputs from records and evaluate forests on them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .dna import INDICATORS, RAW_FIELDS, RunnerDna, compute_dna_raw, normalize_dna
from .errors import InvalidRecord, KeyMismatch
from .evaluation import ConfusionMatrix, accuracy, confusion_matrix, kappa, stratified_kfold, stratified_split
from .features import FEATURE_COLUMNS, Dataset, FeatureVector, extract_feature_vector
from .forest import Forest, ForestParams, oob_error, train_forest
from .gps import KINEMATIC_COLUMNS, KinematicFeatures, track_kinematics
from .ingest import Activity, ActivityRecord

FeatureSet = Literal["dna", "dna+gps", "raw540"]
ModelKind = Literal["activity", "identity"]
FEATURE_SETS = ("dna", "dna+gps", "raw540")
MODEL_KINDS = ("activity", "identity")
ACTIVITY_CLASSES = tuple(a.value for a in Activity)

DNA_COLUMNS = ("record_id", "label", "sex", "volunteer_id", *RAW_FIELDS, *INDICATORS)


def cohort_dna(
    records: Sequence[ActivityRecord],
    m: int = 2,
    r_factor: float = 0.2,
    amplitude_source: str = "accelerometer",
) -> list[RunnerDna]:
    raw = [(r.record_id, compute_dna_raw(r, m, r_factor, amplitude_source)) for r in records]
    return normalize_dna(raw)


def dna_to_csv(records: Sequence[ActivityRecord], dna: Sequence[RunnerDna]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DNA_COLUMNS)
    for rec, d in zip(records, dna):
        if rec.record_id != d.record_id:
            raise KeyMismatch(f"record order mismatch: {rec.record_id} vs {d.record_id}")
        w.writerow([
            rec.record_id, rec.label.value, rec.volunteer.sex.value, rec.volunteer.volunteer_id,
            *(repr(v) for v in d.raw.as_tuple()), *(repr(v) for v in d.normalized),
        ])
    return buf.getvalue()


def read_dna_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = [c for c in ("label", "sex", *INDICATORS) if rows and c not in rows[0]]
    if missing:
        raise KeyMismatch(f"dna CSV lacks columns {missing}")
    for row in rows:
        for c in (*RAW_FIELDS, *INDICATORS):
            if c in row:
                row[c] = float(row[c])
    return rows


def record_kinematics(record: ActivityRecord) -> KinematicFeatures:
    if not record.gps:
        raise InvalidRecord(f"{record.record_id}: no GPS track")
    return track_kinematics(record.gps)[1]


def kinematics_to_csv(records: Sequence[ActivityRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record_id", "label", *KINEMATIC_COLUMNS])
    for rec in records:
        k = record_kinematics(rec).as_dict()
        w.writerow([rec.record_id, rec.label.value, *(repr(k[c]) for c in KINEMATIC_COLUMNS)])
    return buf.getvalue()


def model_label(record: ActivityRecord, kind: ModelKind) -> str:
    return record.label.value if kind == "activity" else record.volunteer.volunteer_id


def model_records(records: Sequence[ActivityRecord], kind: ModelKind) -> list[ActivityRecord]:
    """Activity model sees every record; identity model only running sessions."""
    if kind == "activity":
        return list(records)
    if kind == "identity":
        return [r for r in records if r.label is Activity.RUNNING]
    raise ValueError(f"unknown model kind {kind!r}")


def feature_vectors(
    records: Sequence[ActivityRecord],
    feature_set: FeatureSet,
    kind: ModelKind = "activity",
    dna: Sequence[RunnerDna] | None = None,
) -> list[FeatureVector]:
    """Per-record model inputs.

    ``dna`` must be normalized over the full cohort when supplied; it is
    computed from ``records`` otherwise. Identity filtering happens after
    normalization so both models share one 0-5 scale.
    """
    if feature_set not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {feature_set!r}")
    if feature_set == "raw540":
        chosen = model_records(records, kind)
        return [
            FeatureVector(r.record_id, model_label(r, kind), extract_feature_vector(r).features)
            for r in chosen
        ]
    if dna is None:
        dna = cohort_dna(records)
    by_id = {d.record_id: d for d in dna}
    out = []
    for r in model_records(records, kind):
        feats = dict(zip(INDICATORS, by_id[r.record_id].normalized))
        if feature_set == "dna+gps":
            feats.update(record_kinematics(r).as_dict())
        out.append(FeatureVector(r.record_id, model_label(r, kind), feats))
    return out


def model_classes(dataset: Dataset, kind: ModelKind) -> tuple[str, ...]:
    if kind == "activity":
        return tuple(c for c in ACTIVITY_CLASSES if c in set(dataset.y))
    return tuple(sorted(set(dataset.y)))


@dataclass
class EvalReport:
    model: str
    features: str
    split: str
    n_rows: int
    train_accuracy: float
    oob_error: float
    heldout_accuracy: float
    kappa: float
    confusion: ConfusionMatrix

    @property
    def oob_accuracy(self) -> float:
        return 1.0 - self.oob_error

    def summary_rows(self) -> list[tuple[str, str]]:
        return [
            ("model", self.model),
            ("features", self.features),
            ("split", self.split),
            ("n_rows", str(self.n_rows)),
            ("train_accuracy", f"{self.train_accuracy:.6f}"),
            ("oob_error", f"{self.oob_error:.6f}"),
            ("oob_accuracy", f"{self.oob_accuracy:.6f}"),
            ("heldout_accuracy", f"{self.heldout_accuracy:.6f}"),
            ("kappa", f"{self.kappa:.6f}"),
        ]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerows(self.summary_rows())
        return buf.getvalue()


def _train_accuracy(forest: Forest, data: Dataset) -> float:
    labels, _ = forest.predict_matrix(data.X)
    return float(np.mean([a == b for a, b in zip(labels, data.y)]))


def evaluate(
    dataset: Dataset,
    params: ForestParams,
    kind: ModelKind = "activity",
    feature_set: str = "dna",
    split: str = "holdout",
    seed: int = 0,
    test_fraction: float = 0.2,
    folds: int = 5,
) -> tuple[EvalReport, Forest]:
    """Train and score one model.

    ``holdout``: seeded stratified split; OOB error and train accuracy come
    from the training part. ``kfold``: pooled out-of-fold predictions, with a
    final forest on all rows for OOB and train accuracy. ``oob``: the OOB
    votes stand in for held-out predictions.
    """
    classes = model_classes(dataset, kind)
    if split == "holdout":
        train_idx, test_idx = stratified_split(dataset.y, test_fraction, seed)
        train, test = dataset.subset(train_idx), dataset.subset(test_idx)
        forest = train_forest(train, params, classes)
        preds, _ = forest.predict_matrix(test.X)
        cm = confusion_matrix(test.y, preds, classes)
        oob = oob_error(forest, train)
        train_acc = _train_accuracy(forest, train)
    elif split == "kfold":
        preds_all: list[str | None] = [None] * len(dataset)
        for fold in stratified_kfold(dataset.y, folds, seed):
            held = set(fold)
            rest = [i for i in range(len(dataset)) if i not in held]
            f = train_forest(dataset.subset(rest), params, classes)
            labels, _ = f.predict_matrix(dataset.X[fold])
            for i, lab in zip(fold, labels):
                preds_all[i] = lab
        cm = confusion_matrix(dataset.y, preds_all, classes)
        forest = train_forest(dataset, params, classes)
        oob = oob_error(forest, dataset)
        train_acc = _train_accuracy(forest, dataset)
    elif split == "oob":
        from .forest import oob_predictions

        forest = train_forest(dataset, params, classes)
        pred, _ = oob_predictions(forest, dataset)
        keep = [i for i in range(len(dataset)) if pred[i] >= 0]
        cm = confusion_matrix([dataset.y[i] for i in keep], [forest.classes[pred[i]] for i in keep], classes)
        oob = oob_error(forest, dataset)
        train_acc = _train_accuracy(forest, dataset)
    else:
        raise ValueError(f"unknown split {split!r}")
    acc = accuracy(cm) if cm.total else math.nan
    kap = kappa(cm) if cm.total else math.nan
    report = EvalReport(kind, feature_set, split, len(dataset), train_acc, oob, acc, kap, cm)
    return report, forest
