"""SAMME boosting over depth-1 decision stumps.

SAMME handles the 4- and 8-class stages directly and reduces to classic
two-class AdaBoost when K = 2. Misclassified rows get their weights scaled
by exp(alpha) each round, which is what pushes minority-class rows up the
weight distribution when the majority class dominates early stumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset, NoUsableRound, PerfectLearner, WeakLearnerTooWeak
from .base import TrainedModel
from .tree import TreeNode, TreeParams, grow_tree, tree_predict

ALPHA_CAP = math.log(1e10)


@dataclass
class AdaBoostModel:
    stumps: list[tuple[TreeNode, float]]  # (root, alpha)
    n_classes: int
    round_errors: list[float]             # weighted error per kept round


def samme_alpha(weighted_error: float, n_classes: int) -> float:
    """Round weight: ln((1 - err) / err) + ln(K - 1).

    err = 0 is a PerfectLearner signal (caller caps alpha and stops);
    err >= 1 - 1/K means the stump is no better than chance.
    """
    if weighted_error <= 0.0:
        raise PerfectLearner("weak learner has zero weighted error")
    if weighted_error >= 1.0 - 1.0 / n_classes:
        raise WeakLearnerTooWeak(
            f"weighted error {weighted_error:.6f} >= {1.0 - 1.0 / n_classes:.6f}"
        )
    alpha = math.log((1.0 - weighted_error) / weighted_error) + math.log(n_classes - 1)
    return min(alpha, ALPHA_CAP)


def train_adaboost(
    d: Dataset,
    n_rounds: int = 50,
    weak_params: TreeParams = TreeParams(max_depth=1),
    seed: int = 0,
) -> TrainedModel:
    if d.n_samples == 0:
        raise EmptyDataset("cannot boost on an empty dataset")
    if np.unique(d.labels).size < 2:
        raise NoUsableRound("boosting needs >= 2 classes present")
    n = d.n_samples
    k = d.taxonomy.size
    weights = np.full(n, 1.0 / n)
    stumps: list[tuple[TreeNode, float]] = []
    round_errors: list[float] = []

    for _ in range(n_rounds):
        root = grow_tree(
            d.features, d.labels, k, weak_params, sample_weights=weights
        )
        pred = tree_predict(root, d.features)
        miss = pred != d.labels
        err = float(weights[miss].sum())
        try:
            alpha = samme_alpha(err, k)
        except PerfectLearner:
            stumps.append((root, ALPHA_CAP))
            round_errors.append(err)
            break
        except WeakLearnerTooWeak:
            if not stumps:
                raise NoUsableRound(
                    "first weak learner is already no better than chance"
                ) from None
            break
        stumps.append((root, alpha))
        round_errors.append(err)
        weights[miss] *= math.exp(alpha)
        weights /= weights.sum()

    model = AdaBoostModel(stumps=stumps, n_classes=k, round_errors=round_errors)
    return TrainedModel(
        kind="adaboost",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={
            "n_rounds": n_rounds,
            "seed": seed,
            "weak_max_depth": weak_params.max_depth,
            "criterion": weak_params.criterion.value,
        },
        payload=model,
    )


def adaboost_proba(model: AdaBoostModel, X: np.ndarray) -> np.ndarray:
    """Alpha-weighted vote shares."""
    scores = np.zeros((X.shape[0], model.n_classes), dtype=np.float64)
    for root, alpha in model.stumps:
        pred = tree_predict(root, X)
        scores[np.arange(X.shape[0]), pred] += alpha
    return scores / scores.sum(axis=1, keepdims=True)
