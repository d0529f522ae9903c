"""JSON configuration for datasets and experiment runs.

The schema config describes how to read a flow CSV (feature columns or
"all numeric except labels", per-stage label columns, alias map, missing
tokens); the run config wires dataset + schema + per-stage specs + seed
into one reproducible experiment.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .data import (
    DEFAULT_MISSING_TOKENS,
    ClassTaxonomy,
    Dataset,
    ImputeStrategy,
    NormMethod,
    RawTable,
    Stage,
    load_flow_csv,
    to_dataset,
)
from .errors import ConfigError
from .features import ScoreMethod
from .metrics import ReportFormat
from .pipeline import DEFAULT_CASCADE_GATE, Routing, StageSpec

_STAGE_ALIASES = {
    "stagei": Stage.STAGE_I, "stage1": Stage.STAGE_I, "1": Stage.STAGE_I,
    "i": Stage.STAGE_I, "dtc1": Stage.STAGE_I,
    "stageii": Stage.STAGE_II, "stage2": Stage.STAGE_II, "2": Stage.STAGE_II,
    "ii": Stage.STAGE_II, "dtc2": Stage.STAGE_II,
    "stageiii": Stage.STAGE_III, "stage3": Stage.STAGE_III, "3": Stage.STAGE_III,
    "iii": Stage.STAGE_III, "dtc3": Stage.STAGE_III,
}

_METHOD_ALIASES = {
    "fisher": ScoreMethod.FISHER,
    "infogain": ScoreMethod.INFO_GAIN,
    "information_gain": ScoreMethod.INFO_GAIN,
    "ig": ScoreMethod.INFO_GAIN,
    "chi2": ScoreMethod.CHI_SQUARE,
    "chi_square": ScoreMethod.CHI_SQUARE,
    "chisquare": ScoreMethod.CHI_SQUARE,
}


def parse_stage(text: str) -> Stage:
    key = str(text).strip().lower().replace(" ", "").replace("-", "")
    if key not in _STAGE_ALIASES:
        raise ConfigError(f"unknown stage {text!r}; use StageI, StageII, or StageIII")
    return _STAGE_ALIASES[key]


def parse_method(text: str) -> ScoreMethod:
    key = str(text).strip().lower()
    if key not in _METHOD_ALIASES:
        valid = ", ".join(sorted({m.value for m in ScoreMethod}))
        raise ConfigError(f"unknown selection method {text!r}; valid: {valid}")
    return _METHOD_ALIASES[key]


@dataclass(frozen=True)
class SchemaConfig:
    delimiter: str = ","
    features: tuple[str, ...] | None = None   # None = all numeric except labels
    exclude: tuple[str, ...] = ()
    label_columns: dict[Stage, str] = field(default_factory=dict)
    aliases: dict[Stage, dict[str, str]] = field(default_factory=dict)
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS


def _read_json(path: str, what: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"{what} file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {what} file {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} file {path} must hold a JSON object")
    return obj


def load_schema(path: str) -> SchemaConfig:
    obj = _read_json(path, "schema")
    features = obj.get("features", "all")
    if features == "all":
        features = None
    elif not isinstance(features, list):
        raise ConfigError('schema "features" must be a list or "all"')
    label_columns = {
        parse_stage(key): str(value)
        for key, value in obj.get("label_columns", {}).items()
    }
    aliases = {
        parse_stage(key): {str(a): str(b) for a, b in mapping.items()}
        for key, mapping in obj.get("aliases", {}).items()
    }
    tokens = obj.get("missing_tokens")
    return SchemaConfig(
        delimiter=str(obj.get("delimiter", ",")),
        features=None if features is None else tuple(str(f) for f in features),
        exclude=tuple(str(c) for c in obj.get("exclude", ())),
        label_columns=label_columns,
        aliases=aliases,
        missing_tokens=(
            DEFAULT_MISSING_TOKENS if tokens is None else tuple(str(t) for t in tokens)
        ),
    )


def infer_feature_columns(table: RawTable, schema: SchemaConfig) -> list[str]:
    """All-numeric columns, skipping label and excluded columns. A column is
    numeric when every cell is a missing token or parses as a float."""
    skip = set(schema.label_columns.values()) | set(schema.exclude)
    tokens = set(schema.missing_tokens)
    numeric = []
    for j, name in enumerate(table.header):
        if name in skip:
            continue
        ok = True
        for row in table.rows:
            cell = row[j].strip()
            if cell in tokens:
                continue
            try:
                float(cell)
            except ValueError:
                ok = False
                break
        if ok:
            numeric.append(name)
    return numeric


def feature_columns_for(table: RawTable, schema: SchemaConfig) -> list[str]:
    if schema.features is not None:
        return list(schema.features)
    columns = infer_feature_columns(table, schema)
    if not columns:
        raise ConfigError("no numeric feature columns found")
    return columns


def stage_dataset(table: RawTable, schema: SchemaConfig, stage: Stage) -> Dataset:
    """Encode one stage's labels over the schema's feature columns. The
    missing-value mask is preserved; impute before training."""
    if stage not in schema.label_columns:
        raise ConfigError(f"schema has no label column for {stage.value}")
    return to_dataset(
        table,
        feature_columns_for(table, schema),
        schema.label_columns[stage],
        ClassTaxonomy.for_stage(stage),
        label_aliases=schema.aliases.get(stage),
        missing_tokens=schema.missing_tokens,
    )


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    schema_path: str
    schema: SchemaConfig
    seed: int | None
    out_dir: str | None
    format: ReportFormat
    routing: Routing
    cascade_gate: str
    specs: dict[Stage, StageSpec]


def _parse_spec(stage: Stage, obj: dict, schema: SchemaConfig) -> StageSpec:
    if "learner" not in obj:
        raise ConfigError(f"{stage.value} spec needs a learner")
    method = obj.get("selection_method")
    top_k = obj.get("top_k")
    if method is not None and str(method).lower() not in ("all", "none"):
        parsed_method = parse_method(method)
    else:
        parsed_method, top_k = None, None
    try:
        normalization = NormMethod(str(obj.get("normalization", "minmax")).lower())
        imputation = ImputeStrategy(str(obj.get("imputation", "median")).lower())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return StageSpec(
        stage=stage,
        learner=str(obj["learner"]),
        learner_params=dict(obj.get("learner_params", {})),
        selection_method=parsed_method,
        top_k=None if top_k is None else int(top_k),
        n_bins=int(obj.get("n_bins", 10)),
        label_column=schema.label_columns.get(stage, "label"),
        normalization=normalization,
        imputation=imputation,
    )


def load_run_config(path: str) -> RunConfig:
    obj = _read_json(path, "config")
    for key in ("dataset", "schema"):
        if key not in obj:
            raise ConfigError(f"config {path} lacks {key!r}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    dataset = resolve(str(obj["dataset"]))
    schema_path = resolve(str(obj["schema"]))
    if not os.path.exists(dataset):
        raise ConfigError(f"dataset file not found: {dataset}")
    schema = load_schema(schema_path)
    try:
        routing = Routing(str(obj.get("routing", "independent")).lower())
    except ValueError:
        raise ConfigError(f"unknown routing {obj.get('routing')!r}") from None
    try:
        fmt = ReportFormat(str(obj.get("format", "csv")).lower())
    except ValueError:
        raise ConfigError(f"unknown format {obj.get('format')!r}") from None
    specs = {}
    for key, spec_obj in obj.get("stages", {}).items():
        stage = parse_stage(key)
        specs[stage] = _parse_spec(stage, spec_obj, schema)
    seed = obj.get("seed")
    return RunConfig(
        dataset=dataset,
        schema_path=schema_path,
        schema=schema,
        seed=None if seed is None else int(seed),
        out_dir=obj.get("out_dir"),
        format=fmt,
        routing=routing,
        cascade_gate=str(obj.get("cascade_gate", DEFAULT_CASCADE_GATE)),
        specs=specs,
    )
