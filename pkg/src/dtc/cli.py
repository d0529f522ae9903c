"""Command-line experiment runner.

Subcommands: prep, rank, train, eval, cv, pipeline train, pipeline eval,
report. Every run is driven by a JSON config plus flag overrides, and the
seed is always explicit: there is no wall-clock default anywhere. Exit
codes: 0 ok, 2 input/format error, 3 config error, 4 learner failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import (
    RunConfig,
    SchemaConfig,
    feature_columns_for,
    load_run_config,
    load_schema,
    parse_method,
    parse_stage,
    stage_dataset,
)
from .data import (
    Dataset,
    ImputeStrategy,
    Stage,
    fill_missing,
    impute_missing,
    load_flow_csv,
    median_fill_values,
    stratified_split,
)
from .errors import ConfigError, DataError, DtcError, LearnerError
from .features import rank_features, ranking_to_csv
from .figures import save_comparison_figures
from .metrics import (
    STAGE_LABELS,
    ReportFormat,
    comparison_rows,
    confusion_matrix,
    cross_validate,
    metrics_from_confusion,
    render_rows,
    sort_rows,
)
from .pipeline import (
    PipelineModel,
    Routing,
    StageArtifact,
    load_pipeline,
    load_stage_artifact,
    predict_routed,
    routed_path_counts,
    save_pipeline,
    save_stage_artifact,
    stage_predict,
    stage_transform,
    train_pipeline,
    train_stage,
)

KIND_LABELS = {
    "decision_tree": "DecisionTree",
    "random_forest": "RandomForest",
    "adaboost": "AdaBoost",
    "gradient_boosting": "GradientBoosting",
    "gaussian_nb": "NaiveBayes",
    "knn": "KNN",
}

FORMAT_EXT = {
    ReportFormat.CSV: "csv",
    ReportFormat.JSON: "json",
    ReportFormat.TEXT: "txt",
}


class OutputTracker:
    """Registers written files so a failed command leaves nothing behind."""

    def __init__(self):
        self.paths: list[str] = []

    def write_text(self, path: str, text: str) -> str:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        self.paths.append(path)
        return path

    def write_json(self, path: str, obj) -> str:
        return self.write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def register(self, path: str) -> str:
        self.paths.append(path)
        return path

    def cleanup(self) -> None:
        for path in self.paths:
            try:
                os.remove(path)
            except OSError:
                pass


# -- shared option plumbing ---------------------------------------------------

def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run config JSON (default: none)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed; required here or in the config (default: none)")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config out_dir or '.')")
    parser.add_argument("--format", choices=["csv", "json", "text"], default=None,
                        help="report format (default: config format or csv)")
    parser.add_argument("--threads", default="1",
                        help="worker threads, a number or 'auto' (default: 1)")


def _load_config(args) -> RunConfig | None:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return None


def _resolve_seed(args, cfg: RunConfig | None) -> int:
    if args.seed is not None:
        return int(args.seed)
    if cfg is not None and cfg.seed is not None:
        return cfg.seed
    raise ConfigError("a seed is required (--seed or config 'seed')")


def _resolve_out(args, cfg: RunConfig | None) -> str:
    out = args.out or (cfg.out_dir if cfg else None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_format(args, cfg: RunConfig | None) -> ReportFormat:
    if args.format:
        return ReportFormat(args.format)
    return cfg.format if cfg else ReportFormat.CSV


def _resolve_threads(args) -> int:
    text = str(args.threads).strip().lower()
    if text == "auto":
        return os.cpu_count() or 1
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"--threads must be a number or 'auto', got {args.threads!r}")
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _dataset_inputs(args, cfg: RunConfig | None) -> tuple[str, SchemaConfig]:
    csv_path = getattr(args, "csv", None) or getattr(args, "dataset", None)
    if csv_path is None and cfg is not None:
        csv_path = cfg.dataset
    if csv_path is None:
        raise ConfigError("no dataset: give --csv/--dataset or a config with 'dataset'")
    schema_path = getattr(args, "schema", None)
    if schema_path:
        schema = load_schema(schema_path)
    elif cfg is not None:
        schema = cfg.schema
    else:
        raise ConfigError("no schema: give --schema or a config with 'schema'")
    return csv_path, schema


def _spec_for(cfg: RunConfig | None, stage: Stage):
    if cfg is None:
        raise ConfigError("this command needs --config with per-stage specs")
    spec = cfg.specs.get(stage)
    if spec is None:
        raise ConfigError(f"config has no spec for {stage.value}")
    return spec


def _stage_file_tag(stage: Stage) -> str:
    return stage.value.lower()


def _metrics_row(artifact: StageArtifact, report) -> dict:
    rows = comparison_rows(
        [(KIND_LABELS[artifact.model.kind], STAGE_LABELS[artifact.spec.stage], report)]
    )
    return rows[0]


def _evaluate_artifact(artifact: StageArtifact, d: Dataset):
    y_pred = stage_predict(artifact, d.features)
    return metrics_from_confusion(
        confusion_matrix(d.labels, y_pred, artifact.model.taxonomy)
    )


# -- commands -----------------------------------------------------------------

def cmd_prep(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    csv_path, schema = _dataset_inputs(args, cfg)
    out_dir = _resolve_out(args, cfg)
    strategy = ImputeStrategy(args.impute)

    timing: dict[str, float] = {}
    started = time.perf_counter()
    table = load_flow_csv(csv_path, schema.delimiter)
    if not schema.label_columns:
        raise ConfigError("schema configures no label columns")
    stages = sorted(schema.label_columns, key=lambda s: s.value)
    datasets = {stage: stage_dataset(table, schema, stage) for stage in stages}
    timing["load"] = time.perf_counter() - started

    base = datasets[stages[0]]
    imputed_per_column = {
        name: int(count)
        for name, count in zip(base.feature_names, base.missing_mask.sum(axis=0))
    }
    dropped = 0
    if strategy is ImputeStrategy.DROP_ROW:
        keep = ~base.missing_mask.any(axis=1)
        dropped = int((~keep).sum())
        datasets = {s: d.subset(np.nonzero(keep)[0]) for s, d in datasets.items()}
        base = datasets[stages[0]]
        if base.n_samples == 0:
            raise DataError("drop-row imputation removed every row")
        cleaned = impute_missing(base, ImputeStrategy.DROP_ROW)
    else:
        cleaned = impute_missing(base, ImputeStrategy.MEDIAN_PER_FEATURE)

    stem = os.path.splitext(os.path.basename(csv_path))[0]
    out_csv = os.path.join(out_dir, f"{stem}.prepared.csv")
    out_manifest = os.path.join(out_dir, f"{stem}.prepared.manifest.json")

    label_column_names = {s: f"{_stage_file_tag(s)}_label" for s in stages}
    lines = [
        ",".join(list(cleaned.feature_names) + [label_column_names[s] for s in stages])
    ]
    for i in range(cleaned.n_samples):
        cells = [repr(v) for v in cleaned.features[i]]
        for s in stages:
            d = datasets[s]
            cells.append(d.taxonomy.names[d.labels[i]])
        lines.append(",".join(cells))
    tracker.write_text(out_csv, "\n".join(lines) + "\n")

    histograms = {}
    for s in stages:
        d = datasets[s]
        counts = np.bincount(d.labels, minlength=d.taxonomy.size)
        histograms[s.value] = {
            name: int(c) for name, c in zip(d.taxonomy.names, counts)
        }
    manifest = {
        "source": os.path.abspath(csv_path),
        "rows": cleaned.n_samples,
        "columns": cleaned.n_features,
        "features": list(cleaned.feature_names),
        "label_columns": {s.value: label_column_names[s] for s in stages},
        "aliases": {},
        "missing_tokens": list(schema.missing_tokens),
        "imputation": strategy.value,
        "imputed_cells_per_column": imputed_per_column,
        "dropped_rows": dropped,
        "label_histograms": histograms,
        "timing": timing,  # wall-clock; excluded from determinism checks
    }
    tracker.write_json(out_manifest, manifest)
    print(f"prepared {cleaned.n_samples} rows x {cleaned.n_features} features -> {out_csv}")
    return 0


def cmd_rank(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    csv_path, schema = _dataset_inputs(args, cfg)
    out_dir = _resolve_out(args, cfg)
    stage = parse_stage(args.stage)
    method = parse_method(args.method)

    table = load_flow_csv(csv_path, schema.delimiter)
    d = impute_missing(
        stage_dataset(table, schema, stage), ImputeStrategy.MEDIAN_PER_FEATURE
    )
    ranking = rank_features(d, method, n_bins=args.n_bins)
    out_path = os.path.join(out_dir, f"ranking_{method.value}.csv")
    tracker.write_text(out_path, ranking_to_csv(ranking))
    print(f"ranked {len(ranking)} features -> {out_path}")
    return 0


def _split_and_train(d, spec, fraction, seed, threads, timings):
    plan = stratified_split(d, fraction, seed)
    train_part = d.subset(plan.train_indices)
    test_part = d.subset(plan.test_indices)
    fills = median_fill_values(train_part)
    train_filled = fill_missing(train_part, fills)
    test_filled = fill_missing(test_part, fills)
    model, normalizer, selected = train_stage(
        train_filled, spec, seed, threads, timings=timings
    )
    artifact = StageArtifact(
        spec=spec, model=model, normalizer=normalizer,
        selected_features=tuple(selected),
    )
    return artifact, test_filled


def cmd_train(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    stage = parse_stage(args.stage)
    spec = _spec_for(cfg, stage)
    seed = _resolve_seed(args, cfg)
    out_dir = _resolve_out(args, cfg)
    threads = _resolve_threads(args)
    fmt = _resolve_format(args, cfg)

    timing: dict[str, float] = {}
    started = time.perf_counter()
    table = load_flow_csv(cfg.dataset, cfg.schema.delimiter)
    d = stage_dataset(table, cfg.schema, stage)
    timing["load"] = time.perf_counter() - started

    heldout = None
    if args.test_fraction is not None:
        artifact, test_filled = _split_and_train(
            d, spec, args.test_fraction, seed, threads, timing
        )
        started = time.perf_counter()
        heldout = _evaluate_artifact(artifact, test_filled)
        timing["eval"] = time.perf_counter() - started
    else:
        model, normalizer, selected = train_stage(
            d, spec, seed, threads, timings=timing
        )
        artifact = StageArtifact(
            spec=spec, model=model, normalizer=normalizer,
            selected_features=tuple(selected),
        )

    tag = _stage_file_tag(stage)
    model_path = os.path.join(out_dir, f"model_{tag}.json")
    save_stage_artifact(artifact, model_path)
    tracker.register(model_path)

    manifest = {
        "stage": stage.value,
        "learner": spec.learner,
        "seed": seed,
        "hyperparams": artifact.model.hyperparams,
        "selected_features": [
            d.feature_names[j] for j in artifact.selected_features
        ],
        "n_rows": d.n_samples,
        "test_fraction": args.test_fraction,
        "timing": timing,  # wall-clock; excluded from determinism checks
    }
    tracker.write_json(os.path.join(out_dir, f"train_manifest_{tag}.json"), manifest)
    if heldout is not None:
        tracker.write_json(
            os.path.join(out_dir, f"heldout_metrics_{tag}.json"), heldout.to_dict()
        )
        row = _metrics_row(artifact, heldout)
        ext = FORMAT_EXT[fmt]
        tracker.write_text(
            os.path.join(out_dir, f"heldout_comparison_{tag}.{ext}"),
            render_rows([row], fmt),
        )
    print(f"trained {spec.learner} for {stage.value} -> {model_path}")
    return 0


def cmd_eval(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    artifact = load_stage_artifact(args.model)
    stage = artifact.spec.stage
    csv_path, schema = _dataset_inputs(args, cfg)
    out_dir = _resolve_out(args, cfg)
    fmt = _resolve_format(args, cfg)

    table = load_flow_csv(csv_path, schema.delimiter)
    d = impute_missing(stage_dataset(table, schema, stage), artifact.spec.imputation)
    report = _evaluate_artifact(artifact, d)

    tag = _stage_file_tag(stage)
    tracker.write_json(
        os.path.join(out_dir, f"eval_metrics_{tag}.json"), report.to_dict()
    )
    ext = FORMAT_EXT[fmt]
    tracker.write_text(
        os.path.join(out_dir, f"comparison_{tag}.{ext}"),
        render_rows([_metrics_row(artifact, report)], fmt),
    )
    print(f"accuracy {report.accuracy:.6f} on {d.n_samples} rows")
    return 0


def cmd_cv(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    stage = parse_stage(args.stage)
    spec = _spec_for(cfg, stage)
    seed = _resolve_seed(args, cfg)
    out_dir = _resolve_out(args, cfg)
    threads = _resolve_threads(args)

    table = load_flow_csv(cfg.dataset, cfg.schema.delimiter)
    d = stage_dataset(table, cfg.schema, stage)
    result = cross_validate(d, spec, args.k, seed, threads)

    tag = _stage_file_tag(stage)
    for i, report in enumerate(result.fold_reports, start=1):
        tracker.write_json(
            os.path.join(out_dir, f"cv_{tag}_fold_{i}.json"), report.to_dict()
        )
    summary = {
        "k": args.k,
        "seed": seed,
        "stage": stage.value,
        "learner": spec.learner,
        "mean": result.mean,
        "stddev": result.stddev,
    }
    tracker.write_json(os.path.join(out_dir, f"cv_{tag}_summary.json"), summary)
    print(
        f"cv {stage.value} {spec.learner}: accuracy "
        f"{result.mean['accuracy']:.6f} +/- {result.stddev['accuracy']:.6f}"
    )
    return 0


def _pipeline_stage_datasets(cfg: RunConfig) -> dict[Stage, Dataset]:
    table = load_flow_csv(cfg.dataset, cfg.schema.delimiter)
    return {
        stage: stage_dataset(table, cfg.schema, stage)
        for stage in (Stage.STAGE_I, Stage.STAGE_II, Stage.STAGE_III)
    }


def cmd_pipeline_train(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("pipeline train needs --config")
    specs = [_spec_for(cfg, s) for s in (Stage.STAGE_I, Stage.STAGE_II, Stage.STAGE_III)]
    seed = _resolve_seed(args, cfg)
    out_dir = _resolve_out(args, cfg)
    threads = _resolve_threads(args)
    fmt = _resolve_format(args, cfg)

    timing: dict[str, float] = {}
    started = time.perf_counter()
    datasets = _pipeline_stage_datasets(cfg)
    timing["load"] = time.perf_counter() - started

    test_sets = None
    if args.test_fraction is not None:
        # one shared split, stratified on the finest (Stage III) labels
        plan = stratified_split(datasets[Stage.STAGE_III], args.test_fraction, seed)
        fills = median_fill_values(datasets[Stage.STAGE_I].subset(plan.train_indices))
        test_sets = {}
        for stage, d in datasets.items():
            test_sets[stage] = fill_missing(d.subset(plan.test_indices), fills)
            datasets[stage] = fill_missing(d.subset(plan.train_indices), fills)

    started = time.perf_counter()
    pipeline = train_pipeline(
        datasets, specs, cfg.routing, cfg.cascade_gate, seed, threads
    )
    timing["train"] = time.perf_counter() - started

    pipeline_path = os.path.join(out_dir, "pipeline.json")
    save_pipeline(pipeline, pipeline_path)
    tracker.register(pipeline_path)

    manifest = {
        "seed": seed,
        "routing": cfg.routing.value,
        "cascade_gate": cfg.cascade_gate,
        "stages": {
            a.spec.stage.value: {
                "learner": a.spec.learner,
                "selected_features": list(a.selected_features),
            }
            for a in pipeline.stages
        },
        "test_fraction": args.test_fraction,
        "timing": timing,  # wall-clock; excluded from determinism checks
    }
    tracker.write_json(os.path.join(out_dir, "pipeline_manifest.json"), manifest)

    if test_sets is not None:
        started = time.perf_counter()
        _write_pipeline_reports(pipeline, test_sets, out_dir, fmt, tracker)
        timing["eval"] = time.perf_counter() - started
    print(f"pipeline trained -> {pipeline_path}")
    return 0


def _write_pipeline_reports(
    pipeline: PipelineModel,
    stage_sets: dict[Stage, Dataset],
    out_dir: str,
    fmt: ReportFormat,
    tracker: OutputTracker,
) -> None:
    results = []
    for artifact in pipeline.stages:
        stage = artifact.spec.stage
        report = _evaluate_artifact(artifact, stage_sets[stage])
        results.append(
            (KIND_LABELS[artifact.model.kind], STAGE_LABELS[stage], report)
        )
    rows = comparison_rows(results)
    ext = FORMAT_EXT[fmt]
    tracker.write_text(os.path.join(out_dir, f"comparison.{ext}"), render_rows(rows, fmt))

    features = stage_sets[Stage.STAGE_I].features
    routed = predict_routed(pipeline, features)
    counts = routed_path_counts(routed)
    tracker.write_json(
        os.path.join(out_dir, "path_counts.json"),
        {"routing": pipeline.routing.value, "n_rows": len(routed), "paths": counts},
    )


def cmd_pipeline_eval(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    pipeline = load_pipeline(args.pipeline)
    csv_path, schema = _dataset_inputs(args, cfg)
    out_dir = _resolve_out(args, cfg)
    fmt = _resolve_format(args, cfg)

    table = load_flow_csv(csv_path, schema.delimiter)
    stage_sets = {}
    fills = None
    for stage in (Stage.STAGE_I, Stage.STAGE_II, Stage.STAGE_III):
        d = stage_dataset(table, schema, stage)
        if fills is None:
            fills = median_fill_values(d)
        stage_sets[stage] = fill_missing(d, fills)
    _write_pipeline_reports(pipeline, stage_sets, out_dir, fmt, tracker)
    print(f"evaluated pipeline on {stage_sets[Stage.STAGE_I].n_samples} rows")
    return 0


def _load_result_rows(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(obj, dict) and "comparison" in obj:
        obj = obj["comparison"]
    if not isinstance(obj, list):
        raise DataError(f"{path}: expected a JSON array of comparison rows")
    rows = []
    for entry in obj:
        missing = {"algorithm", "stage", "accuracy", "f1", "precision", "recall"} - set(entry)
        if missing:
            raise DataError(f"{path}: row lacks fields {sorted(missing)}")
        rows.append(entry)
    return rows


def cmd_report(args, tracker: OutputTracker) -> int:
    cfg = _load_config(args)
    out_dir = _resolve_out(args, cfg)
    fmt = _resolve_format(args, cfg)
    rows = []
    for path in args.results:
        rows.extend(_load_result_rows(path))
    rows = sort_rows(rows)
    ext = FORMAT_EXT[fmt]
    report_path = os.path.join(out_dir, f"report.{ext}")
    tracker.write_text(report_path, render_rows(rows, fmt))
    if not args.no_figures:
        for fig_path in save_comparison_figures(rows, out_dir, stem="report"):
            tracker.register(fig_path)
    print(f"report with {len(rows)} rows -> {report_path}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtc",
        description="Multistage darknet traffic classifier toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(
            name, help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        _common_flags(p)
        p.set_defaults(func=func)
        return p

    p = command("prep", cmd_prep, "clean and impute a flow CSV")
    p.add_argument("--csv", help="input CSV (default: config dataset)")
    p.add_argument("--schema", help="schema config JSON (default: config schema)")
    p.add_argument("--impute", choices=["median", "drop"], default="median",
                   help="imputation strategy")

    p = command("rank", cmd_rank, "score and rank features")
    p.add_argument("--csv", help="input CSV (default: config dataset)")
    p.add_argument("--schema", help="schema config JSON (default: config schema)")
    p.add_argument("--stage", required=True, help="stage whose labels to score against")
    p.add_argument("--method", required=True,
                   help="fisher | infogain | chi2")
    p.add_argument("--n-bins", type=int, default=10,
                   help="equal-frequency bins for infogain/chi2")

    p = command("train", cmd_train, "train one stage model")
    p.add_argument("--stage", required=True, help="StageI | StageII | StageIII")
    p.add_argument("--test-fraction", type=float, default=None,
                   help="hold out a stratified test split and report its metrics")

    p = command("eval", cmd_eval, "evaluate a trained stage model")
    p.add_argument("--model", required=True, help="stage model JSON from train")
    p.add_argument("--dataset", help="CSV to evaluate (default: config dataset)")
    p.add_argument("--schema", help="schema config JSON (default: config schema)")

    p = command("cv", cmd_cv, "stratified k-fold cross-validation")
    p.add_argument("--stage", required=True, help="StageI | StageII | StageIII")
    p.add_argument("--k", type=int, default=5, help="number of folds")

    pipe = sub.add_parser("pipeline", help="three-stage pipeline commands")
    pipe_sub = pipe.add_subparsers(dest="pipeline_command", required=True)
    p = pipe_sub.add_parser(
        "train", help="train all three stages",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _common_flags(p)
    p.add_argument("--test-fraction", type=float, default=None,
                   help="hold out a stratified test split and report stage-wise metrics")
    p.set_defaults(func=cmd_pipeline_train)
    p = pipe_sub.add_parser(
        "eval", help="evaluate a trained pipeline",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _common_flags(p)
    p.add_argument("--pipeline", required=True, help="pipeline JSON from pipeline train")
    p.add_argument("--dataset", help="CSV to evaluate (default: config dataset)")
    p.add_argument("--schema", help="schema config JSON (default: config schema)")
    p.set_defaults(func=cmd_pipeline_eval)

    p = command("report", cmd_report, "merge comparison rows; emit table and figures")
    p.add_argument("--results", nargs="+", required=True,
                   help="comparison JSON files from eval / pipeline eval")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG figure rendering")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    tracker = OutputTracker()
    try:
        return args.func(args, tracker)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        tracker.cleanup()
        return 3
    except DataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        tracker.cleanup()
        return 2
    except LearnerError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        tracker.cleanup()
        return 4
    except DtcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        tracker.cleanup()
        return 2


if __name__ == "__main__":
    sys.exit(main())
