"""Three-stage classifier orchestration.

Stages are trained independently, each on its own label column over the
shared feature namespace; routing (independent vs cascade) only affects
prediction. Per-stage seeds are the master seed plus the stage index, so a
pipeline is reproducible end to end from one integer.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import (
    ClassTaxonomy,
    Dataset,
    ImputeStrategy,
    NormMethod,
    NormalizationParams,
    Stage,
    apply_normalizer,
    fit_normalizer,
    impute_missing,
)
from .errors import (
    ColumnMismatch,
    ConfigError,
    IoError,
    SchemaError,
    ShapeMismatch,
    SpecMismatch,
    VersionMismatch,
)
from .features import ScoreMethod, rank_features, select_top_k
from .learners import (
    TrainedModel,
    TreeParams,
    predict,
    train_adaboost,
    train_decision_tree,
    train_gaussian_nb,
    train_gradient_boosting,
    train_knn,
    train_random_forest,
)
from .learners.serialize import FORMAT_VERSION, model_from_dict, model_to_dict
from .learners.tree import Criterion

STAGE_ORDER = (Stage.STAGE_I, Stage.STAGE_II, Stage.STAGE_III)
DEFAULT_CASCADE_GATE = "Malicious"


class Routing(enum.Enum):
    INDEPENDENT = "independent"
    CASCADE = "cascade"


@dataclass(frozen=True)
class StageSpec:
    """What to train at one stage: learner, selection, preprocessing."""

    stage: Stage
    learner: str
    learner_params: dict[str, Any] = dataclasses.field(default_factory=dict)
    selection_method: ScoreMethod | None = None   # None = keep all features
    top_k: int | None = None
    n_bins: int = 10
    label_column: str = "label"
    normalization: NormMethod = NormMethod.MINMAX
    imputation: ImputeStrategy = ImputeStrategy.MEDIAN_PER_FEATURE

    def taxonomy(self) -> ClassTaxonomy:
        return ClassTaxonomy.for_stage(self.stage)


@dataclass
class StageArtifact:
    spec: StageSpec
    model: TrainedModel
    normalizer: NormalizationParams
    selected_features: tuple[int, ...]


@dataclass
class PipelineModel:
    stages: list[StageArtifact]       # Stage I, II, III in order
    routing: Routing
    cascade_gate: str
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class RoutedPrediction:
    stage1: str
    stage2: str | None
    stage3: str | None


def _tree_params(params: dict[str, Any]) -> TreeParams:
    return TreeParams(
        max_depth=params.get("max_depth"),
        min_samples_split=int(params.get("min_samples_split", 2)),
        min_samples_leaf=int(params.get("min_samples_leaf", 1)),
        criterion=Criterion(params.get("criterion", "gini")),
    )


def _balanced_weights(d: Dataset) -> np.ndarray:
    counts = np.bincount(d.labels, minlength=d.taxonomy.size)
    k_present = (counts > 0).sum()
    per_class = np.where(counts > 0, d.n_samples / (k_present * np.maximum(counts, 1)), 0.0)
    return per_class[d.labels]


def fit_learner(
    kind: str,
    d: Dataset,
    params: dict[str, Any],
    seed: int,
    n_threads: int = 1,
) -> TrainedModel:
    """Train one of the six learner kinds from a parameter dict."""
    params = dict(params)
    class_weight = params.pop("class_weight", None)
    weights = _balanced_weights(d) if class_weight == "balanced" else None
    if kind == "decision_tree":
        return train_decision_tree(d, _tree_params(params), sample_weights=weights)
    if kind == "random_forest":
        return train_random_forest(
            d,
            _tree_params(params),
            n_trees=int(params.get("n_trees", 100)),
            seed=seed,
            bootstrap=bool(params.get("bootstrap", True)),
            n_features_per_split=params.get("n_features_per_split"),
            n_threads=n_threads,
            sample_weights=weights,
        )
    if kind == "adaboost":
        weak = TreeParams(
            max_depth=int(params.get("weak_max_depth", 1)),
            criterion=Criterion(params.get("criterion", "gini")),
        )
        return train_adaboost(
            d, n_rounds=int(params.get("n_rounds", 50)), weak_params=weak, seed=seed
        )
    if kind == "gradient_boosting":
        return train_gradient_boosting(
            d,
            n_stages=int(params.get("n_stages", 100)),
            learning_rate=float(params.get("learning_rate", 0.1)),
            max_depth=int(params.get("max_depth", 3)),
            seed=seed,
        )
    if kind == "gaussian_nb":
        return train_gaussian_nb(d)
    if kind == "knn":
        return train_knn(d, k=int(params.get("k", 5)))
    raise ConfigError(f"unknown learner kind {kind!r}")


def train_stage(
    d: Dataset,
    spec: StageSpec,
    seed: int,
    n_threads: int = 1,
    timings: dict[str, float] | None = None,
) -> tuple[TrainedModel, NormalizationParams, list[int]]:
    """Impute, fit the normalizer, rank and select features, fit the learner.

    Every statistic is fitted on the rows given here, so callers hand in
    training rows only.
    """
    expected = spec.taxonomy()
    if d.taxonomy.size != expected.size:
        raise SpecMismatch(
            f"{spec.stage.value} expects {expected.size} classes, "
            f"dataset taxonomy has {d.taxonomy.size}"
        )
    started = time.perf_counter()
    imputed = impute_missing(d, spec.imputation)
    normalizer = fit_normalizer(imputed, spec.normalization)
    normed = apply_normalizer(imputed, normalizer)
    if spec.selection_method is None or spec.top_k is None:
        selected = list(range(d.n_features))
    else:
        ranking = rank_features(normed, spec.selection_method, spec.n_bins)
        selected = select_top_k(ranking, spec.top_k)
    narrowed = dataclasses.replace(
        normed,
        features=normed.features[:, selected],
        missing_mask=normed.missing_mask[:, selected],
        feature_names=tuple(normed.feature_names[j] for j in selected),
    )
    if timings is not None:
        timings["select"] = time.perf_counter() - started
    started = time.perf_counter()
    model = fit_learner(spec.learner, narrowed, spec.learner_params, seed, n_threads)
    if timings is not None:
        timings["train"] = time.perf_counter() - started
    model = dataclasses.replace(model, feature_subset=tuple(selected))
    return model, normalizer, selected


def train_pipeline(
    stage_datasets: dict[Stage, Dataset],
    specs: list[StageSpec],
    routing: Routing = Routing.INDEPENDENT,
    cascade_gate: str = DEFAULT_CASCADE_GATE,
    seed: int = 0,
    n_threads: int = 1,
) -> PipelineModel:
    """Train all three stages on their own label columns."""
    if sorted(s.stage.value for s in specs) != [s.value for s in STAGE_ORDER]:
        raise ConfigError("pipeline needs exactly one spec per stage I/II/III")
    by_stage = {s.stage: s for s in specs}
    names = None
    for stage in STAGE_ORDER:
        d = stage_datasets.get(stage)
        if d is None:
            raise ConfigError(f"no dataset for {stage.value}")
        if names is None:
            names = d.feature_names
        elif d.feature_names != names:
            raise ColumnMismatch(
                f"{stage.value} feature columns differ from Stage I's"
            )
    artifacts = []
    for offset, stage in enumerate(STAGE_ORDER):
        spec = by_stage[stage]
        model, normalizer, selected = train_stage(
            stage_datasets[stage], spec, seed + offset, n_threads
        )
        artifacts.append(
            StageArtifact(
                spec=spec,
                model=model,
                normalizer=normalizer,
                selected_features=tuple(selected),
            )
        )
    return PipelineModel(
        stages=artifacts,
        routing=routing,
        cascade_gate=cascade_gate,
        feature_names=names,
    )


def stage_transform(artifact: StageArtifact, X: np.ndarray) -> np.ndarray:
    """Apply a stage's stored normalizer, then its feature subset."""
    X = np.asarray(X, dtype=np.float64)
    params = artifact.normalizer
    if X.ndim != 2 or X.shape[1] != len(params.per_feature):
        got = X.shape[1] if X.ndim == 2 else None
        raise ShapeMismatch(
            f"stage expects {len(params.per_feature)} feature columns, got {got}"
        )
    out = np.empty_like(X)
    for j, (a, b) in enumerate(params.per_feature):
        col = X[:, j]
        if params.method is NormMethod.MINMAX:
            span = b - a
            out[:, j] = 0.0 if span == 0.0 else (col - a) / span
        else:
            out[:, j] = 0.0 if b == 0.0 else (col - a) / b
    return out[:, list(artifact.selected_features)]


def stage_predict(artifact: StageArtifact, X: np.ndarray) -> np.ndarray:
    return predict(artifact.model, stage_transform(artifact, X))


def predict_routed(p: PipelineModel, X: np.ndarray) -> list[RoutedPrediction]:
    """Per-row stage predictions; cascade short-circuits at the gate."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(p.feature_names):
        got = X.shape[1] if X.ndim == 2 else None
        raise ShapeMismatch(
            f"pipeline expects {len(p.feature_names)} features, got {got}"
        )
    n = X.shape[0]
    s1, s2, s3 = p.stages
    names1 = s1.model.taxonomy.names
    stage1_idx = stage_predict(s1, X)
    stage1 = [names1[i] for i in stage1_idx]

    if p.routing is Routing.INDEPENDENT:
        active = np.arange(n)
    else:
        active = np.nonzero(np.asarray(stage1) == p.cascade_gate)[0]

    stage2: list[str | None] = [None] * n
    stage3: list[str | None] = [None] * n
    if active.size:
        names2 = s2.model.taxonomy.names
        names3 = s3.model.taxonomy.names
        idx2 = stage_predict(s2, X[active])
        idx3 = stage_predict(s3, X[active])
        for row, i2, i3 in zip(active, idx2, idx3):
            stage2[row] = names2[i2]
            stage3[row] = names3[i3]
    return [RoutedPrediction(stage1[i], stage2[i], stage3[i]) for i in range(n)]


def routed_path_counts(predictions: list[RoutedPrediction]) -> dict[str, int]:
    """Histogram of distinct stage1[->stage2->stage3] paths."""
    counts: dict[str, int] = {}
    for pred in predictions:
        parts = [pred.stage1]
        if pred.stage2 is not None:
            parts.append(pred.stage2)
        if pred.stage3 is not None:
            parts.append(pred.stage3)
        key = "->".join(parts)
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


# -- persistence ------------------------------------------------------------

def spec_to_dict(spec: StageSpec) -> dict[str, Any]:
    return {
        "stage": spec.stage.value,
        "learner": spec.learner,
        "learner_params": spec.learner_params,
        "selection_method": spec.selection_method.value if spec.selection_method else None,
        "top_k": spec.top_k,
        "n_bins": spec.n_bins,
        "label_column": spec.label_column,
        "normalization": spec.normalization.value,
        "imputation": spec.imputation.value,
    }


def spec_from_dict(obj: dict[str, Any]) -> StageSpec:
    return StageSpec(
        stage=Stage(obj["stage"]),
        learner=obj["learner"],
        learner_params=dict(obj.get("learner_params", {})),
        selection_method=(
            ScoreMethod(obj["selection_method"]) if obj.get("selection_method") else None
        ),
        top_k=obj.get("top_k"),
        n_bins=int(obj.get("n_bins", 10)),
        label_column=obj.get("label_column", "label"),
        normalization=NormMethod(obj.get("normalization", "minmax")),
        imputation=ImputeStrategy(obj.get("imputation", "median")),
    )


def _artifact_to_dict(a: StageArtifact) -> dict[str, Any]:
    return {
        "spec": spec_to_dict(a.spec),
        "model": model_to_dict(a.model),
        "normalizer": {
            "method": a.normalizer.method.value,
            "per_feature": [list(pair) for pair in a.normalizer.per_feature],
        },
        "selected_features": list(a.selected_features),
    }


def _artifact_from_dict(entry: dict[str, Any]) -> StageArtifact:
    normalizer = NormalizationParams(
        method=NormMethod(entry["normalizer"]["method"]),
        per_feature=tuple(
            (float(a), float(b)) for a, b in entry["normalizer"]["per_feature"]
        ),
    )
    return StageArtifact(
        spec=spec_from_dict(entry["spec"]),
        model=model_from_dict(entry["model"]),
        normalizer=normalizer,
        selected_features=tuple(int(j) for j in entry["selected_features"]),
    )


def save_stage_artifact(artifact: StageArtifact, path: str) -> None:
    """One trained stage (spec + model + normalizer + subset) as JSON."""
    doc = {"format_version": FORMAT_VERSION, **_artifact_to_dict(artifact)}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_stage_artifact(path: str) -> StageArtifact:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"artifact format {version!r}, expected {FORMAT_VERSION}")
    try:
        return _artifact_from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed stage artifact: {exc}") from None


def pipeline_to_dict(p: PipelineModel) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "routing": p.routing.value,
        "cascade_gate": p.cascade_gate,
        "feature_names": list(p.feature_names),
        "stages": [_artifact_to_dict(a) for a in p.stages],
    }


def pipeline_from_dict(obj: dict[str, Any]) -> PipelineModel:
    try:
        version = obj["format_version"]
    except (KeyError, TypeError):
        raise SchemaError("pipeline document lacks a format_version") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"pipeline format {version!r}, expected {FORMAT_VERSION}")
    try:
        return PipelineModel(
            stages=[_artifact_from_dict(entry) for entry in obj["stages"]],
            routing=Routing(obj["routing"]),
            cascade_gate=obj["cascade_gate"],
            feature_names=tuple(obj["feature_names"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed pipeline document: {exc}") from None


def save_pipeline(p: PipelineModel, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(pipeline_to_dict(p), fh)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_pipeline(path: str) -> PipelineModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return pipeline_from_dict(obj)
