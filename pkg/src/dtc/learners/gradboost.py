"""Gradient boosting with multiclass deviance loss.

Per stage, one squared-error regression tree is fit to each class's
residual (one-hot minus softmax), and leaf values take a Newton step. The
per-stage training deviance is recorded so the non-increasing property can
be checked after the fact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset
from .base import TrainedModel

NEWTON_DENOM_FLOOR = 1e-12
PRIOR_FLOOR = 1e-12


@dataclass
class RegLeaf:
    value: float


@dataclass
class RegInternal:
    feature_index: int
    threshold: float
    left: "RegNode"
    right: "RegNode"


RegNode = Union[RegLeaf, RegInternal]


@dataclass
class GradBoostModel:
    init_log_odds: np.ndarray
    stages: list[list[RegNode]]    # one tree per class per stage
    learning_rate: float
    n_stages: int
    max_depth: int
    deviance_path: list[float]     # after init, then after each stage


def _best_regression_split(
    samples: np.ndarray, targets: np.ndarray, max_features: np.ndarray
) -> Optional[tuple[int, float, float]]:
    """Midpoint threshold maximizing the squared-error reduction, same
    tie-break rules as the classification splitter."""
    n = samples.shape[0]
    total_sum = targets.sum()
    total_sse = (targets * targets).sum() - total_sum * total_sum / n
    best: Optional[tuple[int, float, float]] = None
    for j in max_features:
        col = samples[:, int(j)]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        cut = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        if cut.size == 0:
            continue
        sorted_targets = targets[order]
        cum = np.cumsum(sorted_targets)
        cum_sq = np.cumsum(sorted_targets * sorted_targets)
        left_n = cut + 1.0
        right_n = n - left_n
        left_sum = cum[cut]
        right_sum = total_sum - left_sum
        left_sse = cum_sq[cut] - left_sum * left_sum / left_n
        right_sse = (cum_sq[-1] - cum_sq[cut]) - right_sum * right_sum / right_n
        gains = total_sse - left_sse - right_sse
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain <= 0.0:
            continue
        if best is None or gain > best[2]:
            threshold = float((sorted_vals[cut[pos]] + sorted_vals[cut[pos] + 1]) / 2.0)
            best = (int(j), threshold, gain)
    return best


def _grow_regression_tree(
    samples: np.ndarray, targets: np.ndarray, max_depth: int, depth: int = 0
) -> RegNode:
    n = samples.shape[0]
    if depth >= max_depth or n < 2 or np.ptp(targets) == 0.0:
        return RegLeaf(value=float(targets.mean()))
    split = _best_regression_split(samples, targets, np.arange(samples.shape[1]))
    if split is None:
        return RegLeaf(value=float(targets.mean()))
    feature, threshold, _ = split
    go_left = samples[:, feature] <= threshold
    return RegInternal(
        feature_index=feature,
        threshold=threshold,
        left=_grow_regression_tree(samples[go_left], targets[go_left], max_depth, depth + 1),
        right=_grow_regression_tree(samples[~go_left], targets[~go_left], max_depth, depth + 1),
    )


def _leaf_ids(node: RegNode, X: np.ndarray, indices: np.ndarray, out: np.ndarray, leaves: list[RegLeaf]) -> None:
    if indices.size == 0 and not isinstance(node, RegLeaf):
        # still need to register leaves below for consistent numbering
        _leaf_ids(node.left, X, indices, out, leaves)
        _leaf_ids(node.right, X, indices, out, leaves)
        return
    if isinstance(node, RegLeaf):
        out[indices] = len(leaves)
        leaves.append(node)
        return
    go_left = X[indices, node.feature_index] <= node.threshold
    _leaf_ids(node.left, X, indices[go_left], out, leaves)
    _leaf_ids(node.right, X, indices[~go_left], out, leaves)


def regression_tree_apply(node: RegNode, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0], dtype=np.float64)
    _apply(node, X, np.arange(X.shape[0]), out)
    return out


def _apply(node: RegNode, X: np.ndarray, indices: np.ndarray, out: np.ndarray) -> None:
    if indices.size == 0:
        return
    if isinstance(node, RegLeaf):
        out[indices] = node.value
        return
    go_left = X[indices, node.feature_index] <= node.threshold
    _apply(node.left, X, indices[go_left], out)
    _apply(node.right, X, indices[~go_left], out)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _deviance(proba: np.ndarray, labels: np.ndarray) -> float:
    picked = np.clip(proba[np.arange(labels.size), labels], 1e-300, None)
    return float(-np.mean(np.log(picked)))


def train_gradient_boosting(
    d: Dataset,
    n_stages: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
) -> TrainedModel:
    if d.n_samples == 0:
        raise EmptyDataset("cannot boost on an empty dataset")
    n, k = d.n_samples, d.taxonomy.size
    priors = np.bincount(d.labels, minlength=k) / n
    init = np.log(np.maximum(priors, PRIOR_FLOOR))
    init -= init.mean()

    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), d.labels] = 1.0
    scores = np.tile(init, (n, 1))
    deviance_path = [_deviance(_softmax(scores), d.labels)]
    stages: list[list[RegNode]] = []

    for _ in range(n_stages):
        proba = _softmax(scores)
        stage_trees: list[RegNode] = []
        for c in range(k):
            residual = onehot[:, c] - proba[:, c]
            root = _grow_regression_tree(d.features, residual, max_depth)
            leaf_assign = np.zeros(n, dtype=np.int64)
            leaves: list[RegLeaf] = []
            _leaf_ids(root, d.features, np.arange(n), leaf_assign, leaves)
            # Newton step per leaf: ((K-1)/K) * sum r / sum |r| (1 - |r|)
            for leaf_id, leaf in enumerate(leaves):
                member = leaf_assign == leaf_id
                if not member.any():
                    leaf.value = 0.0
                    continue
                r = residual[member]
                denom = max(float((np.abs(r) * (1.0 - np.abs(r))).sum()), NEWTON_DENOM_FLOOR)
                leaf.value = ((k - 1.0) / k) * float(r.sum()) / denom
            scores[:, c] += learning_rate * regression_tree_apply(root, d.features)
            stage_trees.append(root)
        stages.append(stage_trees)
        deviance_path.append(_deviance(_softmax(scores), d.labels))

    model = GradBoostModel(
        init_log_odds=init,
        stages=stages,
        learning_rate=learning_rate,
        n_stages=n_stages,
        max_depth=max_depth,
        deviance_path=deviance_path,
    )
    return TrainedModel(
        kind="gradient_boosting",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={
            "n_stages": n_stages,
            "learning_rate": learning_rate,
            "max_depth": max_depth,
            "seed": seed,
        },
        payload=model,
    )


def gradboost_scores(model: GradBoostModel, X: np.ndarray) -> np.ndarray:
    scores = np.tile(model.init_log_odds, (X.shape[0], 1))
    for stage_trees in model.stages:
        for c, root in enumerate(stage_trees):
            scores[:, c] += model.learning_rate * regression_tree_apply(root, X)
    return scores


def gradboost_proba(model: GradBoostModel, X: np.ndarray) -> np.ndarray:
    return _softmax(gradboost_scores(model, X))
