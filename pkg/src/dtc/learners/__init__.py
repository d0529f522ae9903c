"""The six learners behind one fit/predict contract."""
from __future__ import annotations

import numpy as np

from .adaboost import AdaBoostModel, adaboost_proba, samme_alpha, train_adaboost
from .base import TrainedModel, predict, predict_proba
from .bayes import NaiveBayesModel, gaussian_nb_proba, train_gaussian_nb
from .forest import ForestModel, forest_proba, train_random_forest
from .gradboost import GradBoostModel, gradboost_proba, train_gradient_boosting
from .knn import KnnModel, knn_predict, knn_proba, train_knn
from .tree import (
    Criterion,
    Internal,
    Leaf,
    TreeNode,
    TreeParams,
    best_split,
    entropy_impurity,
    gini,
    train_decision_tree,
    tree_predict,
    tree_proba,
)

LEARNER_KINDS = (
    "decision_tree",
    "random_forest",
    "adaboost",
    "gradient_boosting",
    "gaussian_nb",
    "knn",
)


def _dispatch_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    k = model.n_classes
    if model.kind == "decision_tree":
        return tree_proba(model.payload, X, k)
    if model.kind == "random_forest":
        return forest_proba(model.payload, X, k)
    if model.kind == "adaboost":
        return adaboost_proba(model.payload, X)
    if model.kind == "gradient_boosting":
        return gradboost_proba(model.payload, X)
    if model.kind == "gaussian_nb":
        return gaussian_nb_proba(model.payload, X)
    if model.kind == "knn":
        return knn_proba(model.payload, X, k)
    raise ValueError(f"unknown learner kind {model.kind!r}")


def _dispatch_predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    if model.kind == "knn":
        return knn_predict(model.payload, X, model.n_classes)
    return np.argmax(_dispatch_proba(model, X), axis=1)


__all__ = [
    "AdaBoostModel",
    "Criterion",
    "ForestModel",
    "GradBoostModel",
    "Internal",
    "KnnModel",
    "Leaf",
    "LEARNER_KINDS",
    "NaiveBayesModel",
    "TrainedModel",
    "TreeNode",
    "TreeParams",
    "adaboost_proba",
    "best_split",
    "entropy_impurity",
    "forest_proba",
    "gaussian_nb_proba",
    "gini",
    "gradboost_proba",
    "knn_predict",
    "knn_proba",
    "predict",
    "predict_proba",
    "samme_alpha",
    "train_adaboost",
    "train_decision_tree",
    "train_gaussian_nb",
    "train_gradient_boosting",
    "train_knn",
    "train_random_forest",
    "tree_predict",
    "tree_proba",
]
