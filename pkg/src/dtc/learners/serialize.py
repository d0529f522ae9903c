"""Versioned JSON round-tripping for trained models.

Floats go through Python's shortest-round-trip repr, so load(save(m))
reproduces every parameter bit-for-bit.
"""
from __future__ import annotations

import json
from typing import Any

import numpy as np

from ..data import ClassTaxonomy, Stage
from ..errors import IoError, SchemaError, VersionMismatch
from .adaboost import AdaBoostModel
from .base import TrainedModel
from .bayes import NaiveBayesModel
from .forest import ForestModel
from .gradboost import GradBoostModel, RegInternal, RegLeaf
from .knn import KnnModel
from .tree import Internal, Leaf

FORMAT_VERSION = 1


def _tree_to_dict(node) -> dict[str, Any]:
    if isinstance(node, Leaf):
        return {
            "type": "leaf",
            "class_counts": node.class_counts.tolist(),
            "weighted_counts": node.weighted_counts.tolist(),
            "predicted_class": node.predicted_class,
        }
    return {
        "type": "internal",
        "feature": node.feature_index,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(obj: dict[str, Any]):
    if obj["type"] == "leaf":
        return Leaf(
            class_counts=np.asarray(obj["class_counts"], dtype=np.int64),
            weighted_counts=np.asarray(obj["weighted_counts"], dtype=np.float64),
            predicted_class=int(obj["predicted_class"]),
        )
    return Internal(
        feature_index=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_tree_from_dict(obj["left"]),
        right=_tree_from_dict(obj["right"]),
    )


def _regtree_to_dict(node) -> dict[str, Any]:
    if isinstance(node, RegLeaf):
        return {"type": "leaf", "value": node.value}
    return {
        "type": "internal",
        "feature": node.feature_index,
        "threshold": node.threshold,
        "left": _regtree_to_dict(node.left),
        "right": _regtree_to_dict(node.right),
    }


def _regtree_from_dict(obj: dict[str, Any]):
    if obj["type"] == "leaf":
        return RegLeaf(value=float(obj["value"]))
    return RegInternal(
        feature_index=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_regtree_from_dict(obj["left"]),
        right=_regtree_from_dict(obj["right"]),
    )


def _payload_to_dict(model: TrainedModel) -> dict[str, Any]:
    p = model.payload
    if model.kind == "decision_tree":
        return {"root": _tree_to_dict(p)}
    if model.kind == "random_forest":
        return {
            "trees": [_tree_to_dict(t) for t in p.trees],
            "n_features_per_split": p.n_features_per_split,
            "seed": p.seed,
            "oob_indices": (
                None
                if p.oob_indices is None
                else [oob.tolist() for oob in p.oob_indices]
            ),
        }
    if model.kind == "adaboost":
        return {
            "stumps": [
                {"root": _tree_to_dict(root), "alpha": alpha}
                for root, alpha in p.stumps
            ],
            "n_classes": p.n_classes,
            "round_errors": p.round_errors,
        }
    if model.kind == "gradient_boosting":
        return {
            "init_log_odds": p.init_log_odds.tolist(),
            "stages": [[_regtree_to_dict(t) for t in stage] for stage in p.stages],
            "learning_rate": p.learning_rate,
            "n_stages": p.n_stages,
            "max_depth": p.max_depth,
            "deviance_path": p.deviance_path,
        }
    if model.kind == "gaussian_nb":
        return {
            "class_priors": p.class_priors.tolist(),
            "means": p.means.tolist(),
            "variances": p.variances.tolist(),
        }
    if model.kind == "knn":
        return {
            "train_features": p.train_features.tolist(),
            "train_labels": p.train_labels.tolist(),
            "k": p.k,
        }
    raise ValueError(f"unknown learner kind {model.kind!r}")


def _payload_from_dict(kind: str, obj: dict[str, Any]):
    if kind == "decision_tree":
        return _tree_from_dict(obj["root"])
    if kind == "random_forest":
        return ForestModel(
            trees=[_tree_from_dict(t) for t in obj["trees"]],
            n_features_per_split=int(obj["n_features_per_split"]),
            seed=int(obj["seed"]),
            oob_indices=(
                None
                if obj["oob_indices"] is None
                else [np.asarray(oob, dtype=np.intp) for oob in obj["oob_indices"]]
            ),
        )
    if kind == "adaboost":
        return AdaBoostModel(
            stumps=[
                (_tree_from_dict(s["root"]), float(s["alpha"])) for s in obj["stumps"]
            ],
            n_classes=int(obj["n_classes"]),
            round_errors=[float(e) for e in obj["round_errors"]],
        )
    if kind == "gradient_boosting":
        return GradBoostModel(
            init_log_odds=np.asarray(obj["init_log_odds"], dtype=np.float64),
            stages=[[_regtree_from_dict(t) for t in stage] for stage in obj["stages"]],
            learning_rate=float(obj["learning_rate"]),
            n_stages=int(obj["n_stages"]),
            max_depth=int(obj["max_depth"]),
            deviance_path=[float(v) for v in obj["deviance_path"]],
        )
    if kind == "gaussian_nb":
        return NaiveBayesModel(
            class_priors=np.asarray(obj["class_priors"], dtype=np.float64),
            means=np.asarray(obj["means"], dtype=np.float64),
            variances=np.asarray(obj["variances"], dtype=np.float64),
        )
    if kind == "knn":
        return KnnModel(
            train_features=np.asarray(obj["train_features"], dtype=np.float64),
            train_labels=np.asarray(obj["train_labels"], dtype=np.int64),
            k=int(obj["k"]),
        )
    raise SchemaError(f"unknown learner kind {kind!r}")


def model_to_dict(model: TrainedModel) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "taxonomy": {
            "stage": model.taxonomy.stage.value,
            "names": list(model.taxonomy.names),
        },
        "feature_subset": list(model.feature_subset),
        "hyperparams": model.hyperparams,
        "payload": _payload_to_dict(model),
    }


def model_from_dict(obj: dict[str, Any]) -> TrainedModel:
    try:
        version = obj["format_version"]
    except (KeyError, TypeError):
        raise SchemaError("model document lacks a format_version") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model format {version!r}, expected {FORMAT_VERSION}")
    try:
        taxonomy = ClassTaxonomy(
            stage=Stage(obj["taxonomy"]["stage"]),
            names=tuple(obj["taxonomy"]["names"]),
        )
        return TrainedModel(
            kind=obj["kind"],
            taxonomy=taxonomy,
            feature_subset=tuple(int(i) for i in obj["feature_subset"]),
            hyperparams=obj["hyperparams"],
            payload=_payload_from_dict(obj["kind"], obj["payload"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model document: {exc}") from None


def save_model(model: TrainedModel, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(model_to_dict(model), fh)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path: str) -> TrainedModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    return model_from_dict(obj)
