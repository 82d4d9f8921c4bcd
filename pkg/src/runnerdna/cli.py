"""Command-line driver: synth, ingest, features, dna, train, predict, evaluate, ttest, report.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from itertools import combinations
from pathlib import Path
from typing import Sequence

from .dna import INDICATORS
from .errors import DataError
from .evaluation import ConfusionMatrix, GroupSummary, TTestResult, students_t
from .features import Dataset, FeatureVector, mean_decrease_accuracy, select_top_features, vectors_to_csv
from .forest import Forest, ForestParams, train_forest
from .ingest import Activity, AlignPolicy, load_records, write_record
from .pipeline import (
    ACTIVITY_CLASSES,
    FEATURE_SETS,
    MODEL_KINDS,
    cohort_dna,
    dna_to_csv,
    evaluate,
    feature_vectors,
    kinematics_to_csv,
    model_classes,
    read_dna_csv,
    record_kinematics,
)
from .synth import REFERENCE_COUNTS, CohortSpec, generate_cohort, reference_cohort_spec, write_cohort

log = logging.getLogger("runnerdna")

COMMANDS = ("synth", "ingest", "features", "dna", "train", "predict", "evaluate", "ttest", "report")
SIGNIFICANCE_LEGEND = "significance: p<0.10, p<0.05, p<0.01 (two-sided Student t, pooled variance)"


class UsageError(Exception):
    pass


@dataclass
class PipelineConfig:
    input: str | None = None
    out: str | None = None
    apen_m: int = 2
    r_factor: float = 0.2
    amplitude_source: str = "accelerometer"
    n_trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: str | int = "sqrt"
    feature_set: str = "dna"
    split: str = "holdout"
    test_fraction: float = 0.2
    folds: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.input is not None and self.out is not None and Path(self.input).resolve() == Path(self.out).resolve():
            raise UsageError("--in and --out must differ")
        if self.amplitude_source not in ("accelerometer", "linear_acceleration"):
            raise UsageError(f"bad amplitude_source {self.amplitude_source!r}")
        if self.feature_set not in FEATURE_SETS:
            raise UsageError(f"bad feature set {self.feature_set!r}")
        if self.split not in ("holdout", "kfold", "oob"):
            raise UsageError(f"bad split {self.split!r}")
        if isinstance(self.features_per_split, str) and self.features_per_split != "sqrt":
            self.features_per_split = int(self.features_per_split)

    def forest_params(self) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.min_samples_leaf, self.features_per_split, self.seed)


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file values, overridden by any flag given on the command line."""
    values: dict = {}
    if getattr(args, "config", None):
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(values) - {f.name for f in fields(PipelineConfig)}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return PipelineConfig(**values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with pipeline settings")
    p.add_argument("--seed", type=int)


def _add_dna_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--apen-m", dest="apen_m", type=int)
    p.add_argument("--r-factor", dest="r_factor", type=float)
    p.add_argument("--amplitude-source", dest="amplitude_source", choices=("accelerometer", "linear_acceleration"))


def _add_model_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODEL_KINDS, default="activity")
    p.add_argument("--features", dest="feature_set", choices=FEATURE_SETS)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--features-per-split", dest="features_per_split")
    _add_dna_opts(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="runnerdna", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="{" + ",".join(COMMANDS) + "}")

    p = sub.add_parser("synth", help="write a synthetic cohort as ingest-format files")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--reference-shape", "--paper-shape", dest="reference_shape", action="store_true", help="reference cohort: 32/55/45/139 records, 33 volunteers, 20 runners")
    p.add_argument("--counts", help="biking,ebike,walking,running record counts")
    p.add_argument("--volunteers", type=int, default=None)
    p.add_argument("--runners", type=int, default=None)
    p.add_argument("--duration", type=int, default=None, help="fixed session length in seconds")

    p = sub.add_parser("ingest", help="validate and align raw logs")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", choices=[a.value for a in AlignPolicy], default=AlignPolicy.MEAN_PER_SECOND.value)

    p = sub.add_parser("features", help="540-column statistical features")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinematics-out", help="also write GPS kinematic features here")
    p.add_argument("--append-kinematics", action="store_true", help="append kinematic columns to the feature CSV")

    p = sub.add_parser("dna", help="raw and 0-5 normalized indicators per record")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_dna_opts(p)

    p = sub.add_parser("train", help="fit a forest and save it as JSON")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_model_opts(p)

    p = sub.add_parser("predict", help="label records with a saved forest")
    _add_common(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="OOB error, held-out accuracy, kappa, confusion matrix")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None, help="directory for confusion.csv, evaluation.csv, model.json")
    p.add_argument("--split", choices=("holdout", "kfold", "oob"))
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--importance", type=int, default=0, metavar="K",
                   help="also rank features by mean decrease in OOB accuracy and keep the top K")
    p.add_argument("--permutations", type=int, default=10)
    _add_model_opts(p)

    p = sub.add_parser("ttest", help="pooled-variance t-tests on dna.csv")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="dna.csv")
    p.add_argument("--group", choices=("sex", "activity"), required=True)
    p.add_argument("--indicator", choices=(*INDICATORS, "all"), default="all")
    p.add_argument("--activity", choices=[a.value.lower() for a in Activity] + [a.value for a in Activity],
                   default="running", help="activity to restrict to for --group sex")
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="plaintext tables from persisted CSVs")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True, help="directory holding dna.csv and evaluation outputs")
    p.add_argument("--out", default=None)
    return parser


def _write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _records(cfg: PipelineConfig, policy: str = AlignPolicy.MEAN_PER_SECOND.value):
    if not Path(cfg.input).is_dir():
        raise DataError(f"input directory {cfg.input} does not exist")
    return load_records(Path(cfg.input), AlignPolicy(policy))


def cmd_synth(args, cfg: PipelineConfig) -> int:
    if args.reference_shape:
        spec = reference_cohort_spec()
    else:
        counts = dict(REFERENCE_COUNTS)
        if args.counts:
            try:
                values = [int(v) for v in args.counts.split(",")]
            except ValueError:
                raise UsageError("--counts takes four comma-separated integers") from None
            if len(values) != 4:
                raise UsageError("--counts takes four comma-separated integers")
            counts = dict(zip(Activity, values))
        spec = CohortSpec(counts, args.volunteers or 33, args.runners)
    records = generate_cohort(spec, cfg.seed, duration_s=args.duration)
    write_cohort(records, Path(cfg.out))
    print(f"wrote {len(records)} records to {cfg.out}")
    return 0


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    records = _records(cfg, args.policy)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record_id", "label", "volunteer_id", "sex", "height", "weight", "n_samples", "n_gps"])
    for r in records:
        write_record(r, out)
        v = r.volunteer
        w.writerow([r.record_id, r.label.value, v.volunteer_id, v.sex.value, v.height, v.weight,
                    len(r), len(r.gps) if r.gps else 0])
    _write(out / "manifest.csv", buf.getvalue())
    print(f"ingested {len(records)} records into {out}")
    return 0


def cmd_features(args, cfg: PipelineConfig) -> int:
    records = _records(cfg)
    vectors = feature_vectors(records, "raw540")
    if args.append_kinematics:
        vectors = [
            FeatureVector(v.record_id, v.label, {**v.features, **record_kinematics(r).as_dict()})
            for v, r in zip(vectors, records)
        ]
    _write(cfg.out, vectors_to_csv(vectors))
    if args.kinematics_out:
        _write(args.kinematics_out, kinematics_to_csv(records))
    print(f"wrote {len(vectors)} feature rows x {len(vectors[0].features)} columns to {cfg.out}")
    return 0


def cmd_dna(args, cfg: PipelineConfig) -> int:
    records = _records(cfg)
    dna = cohort_dna(records, cfg.apen_m, cfg.r_factor, cfg.amplitude_source)
    _write(cfg.out, dna_to_csv(records, dna))
    print(f"wrote RunnerDNA for {len(dna)} records to {cfg.out}")
    return 0


def _dataset(records, cfg: PipelineConfig, kind: str) -> Dataset:
    dna = None
    if cfg.feature_set != "raw540":
        dna = cohort_dna(records, cfg.apen_m, cfg.r_factor, cfg.amplitude_source)
    return Dataset.from_vectors(feature_vectors(records, cfg.feature_set, kind, dna))


def _model_metadata(cfg: PipelineConfig, kind: str) -> dict:
    return {
        "model": kind,
        "feature_set": cfg.feature_set,
        "apen_m": cfg.apen_m,
        "r_factor": cfg.r_factor,
        "amplitude_source": cfg.amplitude_source,
    }


def cmd_train(args, cfg: PipelineConfig) -> int:
    records = _records(cfg)
    ds = _dataset(records, cfg, args.model)
    forest = train_forest(ds, cfg.forest_params(), model_classes(ds, args.model))
    forest.metadata = _model_metadata(cfg, args.model)
    _write(cfg.out, forest.to_json())
    print(f"trained {args.model} forest ({len(forest.trees)} trees, {len(ds)} rows, "
          f"{len(ds.feature_keys)} features) -> {cfg.out}")
    return 0


def cmd_predict(args, cfg: PipelineConfig) -> int:
    try:
        forest = Forest.from_json(Path(args.model_file).read_text())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot load model {args.model_file}: {exc}") from None
    meta = forest.metadata
    model_cfg = PipelineConfig(
        input=cfg.input,
        feature_set=meta.get("feature_set", "dna"),
        apen_m=meta.get("apen_m", 2),
        r_factor=meta.get("r_factor", 0.2),
        amplitude_source=meta.get("amplitude_source", "accelerometer"),
    )
    kind = meta.get("model", "activity")
    records = _records(model_cfg)
    ds = _dataset(records, model_cfg, kind)
    if tuple(ds.feature_keys) != forest.feature_keys:
        ds = ds.select(forest.feature_keys)
    labels, fractions = forest.predict_matrix(ds.X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record_id", "truth", "predicted", *(f"vote_{c}" for c in forest.classes)])
    for rid, truth, lab, fr in zip(ds.record_ids, ds.y, labels, fractions):
        w.writerow([rid, truth, lab, *(f"{v:.6f}" for v in fr)])
    _write(cfg.out, buf.getvalue())
    correct = sum(a == b for a, b in zip(labels, ds.y))
    print(f"predicted {len(labels)} records ({correct} match their recorded label) -> {cfg.out}")
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    records = _records(cfg)
    ds = _dataset(records, cfg, args.model)
    report, forest = evaluate(ds, cfg.forest_params(), args.model, cfg.feature_set, cfg.split,
                              cfg.seed, cfg.test_fraction, cfg.folds)
    forest.metadata = _model_metadata(cfg, args.model)
    for key, value in report.summary_rows():
        print(f"{key:>18}: {value}")
    ranking = None
    if args.importance:
        full = train_forest(ds, cfg.forest_params(), model_classes(ds, args.model))
        ranking = mean_decrease_accuracy(full, ds, args.permutations, cfg.seed)
        top = select_top_features(ranking, min(args.importance, len(ds.feature_keys)))
        print("top features by mean decrease in OOB accuracy:")
        for k in top:
            print(f"  {k}: {ranking.scores[k]:.4f}")
    if cfg.out:
        out = Path(cfg.out)
        _write(out / "confusion.csv", report.confusion.to_csv())
        _write(out / "evaluation.csv", report.summary_csv())
        _write(out / "model.json", forest.to_json())
        if ranking is not None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["feature", "mean_decrease_accuracy"])
            for k in select_top_features(ranking, len(ranking.scores)):
                w.writerow([k, repr(ranking.scores[k])])
            _write(out / "importance.csv", buf.getvalue())
    return 0


def _summaries(rows: list[dict], indicator: str, key: str, value: str) -> GroupSummary:
    return GroupSummary.of([r[indicator] for r in rows if r[key] == value])


def ttest_rows(rows: list[dict], group: str, indicators: Sequence[str], activity: str = "Running") -> list[dict]:
    """One dict per comparison, in the layout of the activity and sex tables."""
    out = []
    if group == "activity":
        present = [c for c in ACTIVITY_CLASSES if any(r["label"] == c for r in rows)]
        for ind in indicators:
            for a, b in combinations(present, 2):
                res = students_t(_summaries(rows, ind, "label", a), _summaries(rows, ind, "label", b))
                out.append(_ttest_dict(ind, a, b, res))
    elif group == "sex":
        sub = [r for r in rows if r["label"].lower() == activity.lower()]
        for ind in indicators:
            res = students_t(_summaries(sub, ind, "sex", "Female"), _summaries(sub, ind, "sex", "Male"))
            out.append(_ttest_dict(ind, "Female", "Male", res))
    else:
        raise UsageError(f"unknown group {group!r}")
    return out


def _ttest_dict(indicator: str, a: str, b: str, res: TTestResult) -> dict:
    return {
        "indicator": indicator,
        "group1": a,
        "group2": b,
        "mean1": res.group1.mean,
        "sd1": res.group1.sd,
        "n1": res.group1.n,
        "mean2": res.group2.mean,
        "sd2": res.group2.sd,
        "n2": res.group2.n,
        "t": res.t,
        "df": res.df,
        "p": res.p,
        "significance": res.significance,
    }


TTEST_COLUMNS = ("indicator", "group1", "group2", "mean1", "sd1", "n1", "mean2", "sd2", "n2", "t", "df", "p", "significance")


def ttest_csv(results: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TTEST_COLUMNS)
    for r in results:
        w.writerow([f"{r[c]:.6f}" if isinstance(r[c], float) else r[c] for c in TTEST_COLUMNS])
    return buf.getvalue()


def format_activity_ttests(results: list[dict]) -> str:
    lines = [f"{'Indicator':<10} {'Activity I':<12} {'Activity II':<12} {'Mean, SD (I)':<14} "
             f"{'Mean, SD (II)':<14} {'t':>8} {'P':>8}  sig"]
    last = None
    for r in results:
        name = r["indicator"].capitalize() if r["indicator"] != last else ""
        last = r["indicator"]
        lines.append(
            f"{name:<10} {r['group1']:<12} {r['group2']:<12} {r['mean1']:.3f}, {r['sd1']:.3f}   "
            f"{r['mean2']:.3f}, {r['sd2']:.3f}   {r['t']:>8.3f} {r['p']:>8.4f}  {r['significance']}"
        )
    lines.append(SIGNIFICANCE_LEGEND)
    return "\n".join(lines) + "\n"


def format_sex_ttests(results: list[dict]) -> str:
    lines = [f"{'Indicator':<10} {'Gender':<7} {'Mean':>7} {'SD':>7} {'t':>8} {'P':>8}  sig"]
    for r in results:
        lines.append(f"{r['indicator'].capitalize():<10} {'Women':<7} {r['mean1']:>7.3f} {r['sd1']:>7.3f} "
                     f"{r['t']:>8.3f} {r['p']:>8.4f}  {r['significance']}")
        lines.append(f"{'':<10} {'Men':<7} {r['mean2']:>7.3f} {r['sd2']:>7.3f}")
    lines.append(SIGNIFICANCE_LEGEND)
    return "\n".join(lines) + "\n"


def cmd_ttest(args, cfg: PipelineConfig) -> int:
    try:
        rows = read_dna_csv(Path(cfg.input).read_text())
    except OSError as exc:
        raise DataError(str(exc)) from None
    indicators = INDICATORS if args.indicator == "all" else (args.indicator,)
    results = ttest_rows(rows, args.group, indicators, args.activity)
    text = format_sex_ttests(results) if args.group == "sex" else format_activity_ttests(results)
    print(text, end="")
    if cfg.out:
        _write(cfg.out, ttest_csv(results))
    return 0


def format_confusion(cm: ConfusionMatrix) -> str:
    width = max(12, *(len(c) + 1 for c in cm.classes))
    norm = cm.normalized()
    lines = ["(columns: actual labels; rows: predicted)",
             f"{'':<{width}}" + "".join(f"{c:>{width}}" for c in cm.classes)]
    for i, c in enumerate(cm.classes):
        lines.append(f"{c:<{width}}" + "".join(f"{v:>{width}.3f}" for v in norm[i]))
    lines.append(f"{'n (actual)':<{width}}" + "".join(f"{int(v):>{width}d}" for v in cm.counts.sum(axis=0)))
    return "\n".join(lines) + "\n"


def build_report(directory: Path) -> str:
    """Tables rebuilt from dna.csv, confusion.csv and evaluation.csv; nothing is retrained."""
    directory = Path(directory)
    dna_path = directory / "dna.csv"
    if not dna_path.exists():
        raise DataError(f"{dna_path} not found")
    rows = read_dna_csv(dna_path.read_text())
    parts = ["RunnerDNA report", "================", ""]

    conf = directory / "confusion.csv"
    evaluation = directory / "evaluation.csv"
    if conf.exists():
        parts += ["Activity recognition: confusion matrix (column-normalized)", ""]
        parts.append(format_confusion(ConfusionMatrix.from_csv(conf.read_text())))
    if evaluation.exists():
        metrics = list(csv.reader(io.StringIO(evaluation.read_text())))[1:]
        parts += [f"{k}: {v}" for k, v in metrics if k]
        parts.append("")

    parts += ["Indicator t-tests between activities", ""]
    parts.append(format_activity_ttests(ttest_rows(rows, "activity", INDICATORS)))
    runners = [r for r in rows if r["label"] == Activity.RUNNING.value]
    sexes = {r["sex"] for r in runners}
    if {"Male", "Female"} <= sexes:
        parts += ["", "Indicator t-tests by sex (running)", ""]
        parts.append(format_sex_ttests(ttest_rows(rows, "sex", INDICATORS, "Running")))
    return "\n".join(parts)


def cmd_report(args, cfg: PipelineConfig) -> int:
    text = build_report(Path(cfg.input))
    print(text, end="")
    if cfg.out:
        _write(cfg.out, text)
    return 0


HANDLERS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "features": cmd_features,
    "dna": cmd_dna,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ttest": cmd_ttest,
    "report": cmd_report,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        cfg = load_config(args)
        return HANDLERS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
