"""CART-style decision tree with binary splits at midpoint thresholds.

Supports sample weights (for boosting) and per-split candidate-feature
subsets (for forests). Everything is deterministic: candidate features are
scanned in ascending index order and thresholds in ascending value order, so
equal-gain ties always resolve the same way.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset, EmptyNode


class Criterion(enum.Enum):
    GINI = "gini"
    ENTROPY = "entropy"


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    criterion: Criterion = Criterion.GINI


@dataclass
class Leaf:
    class_counts: np.ndarray        # raw sample counts per class
    weighted_counts: np.ndarray     # equals class_counts when unweighted
    predicted_class: int


@dataclass
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


def gini(class_counts: np.ndarray) -> float:
    """Gini impurity, 1 - sum p^2; zero for a pure node."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("impurity of an empty node")
    p = counts / total
    return float(1.0 - (p * p).sum())


def entropy_impurity(class_counts: np.ndarray) -> float:
    """Shannon entropy in bits of the node's class distribution."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("impurity of an empty node")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _impurity_rows(counts: np.ndarray, criterion: Criterion) -> np.ndarray:
    """Impurity of each row of an (m, K) array of class-count vectors."""
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / totals
    if criterion is Criterion.GINI:
        return 1.0 - (p * p).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log2(p), 0.0)
    return -terms.sum(axis=1)


def best_split(
    samples: np.ndarray,
    labels: np.ndarray,
    candidate_features: np.ndarray,
    criterion: Criterion = Criterion.GINI,
    sample_weights: np.ndarray | None = None,
    min_samples_leaf: int = 1,
    allow_zero_gain: bool = False,
) -> Optional[tuple[int, float, float]]:
    """Exhaustive scan of midpoint thresholds over the candidate features.

    Returns the (feature_index, threshold, gain) maximizing the impurity
    decrease weighted by child sizes, ties going to the lower feature index
    and then the lower threshold. By default splits with no positive gain
    are rejected; `allow_zero_gain` admits them (used to untangle XOR-like
    nodes where every single split is individually uninformative).
    """
    n, _ = samples.shape
    n_classes = int(labels.max()) + 1 if labels.size else 0
    weights = (
        np.ones(n, dtype=np.float64)
        if sample_weights is None
        else np.asarray(sample_weights, dtype=np.float64)
    )
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0

    total_w = onehot * weights[:, None]
    parent_counts = total_w.sum(axis=0)
    parent_impurity = _impurity_rows(parent_counts[None, :], criterion)[0]
    parent_weight = weights.sum()

    best: Optional[tuple[int, float, float]] = None
    min_gain = -np.inf if allow_zero_gain else 0.0
    for j in np.sort(np.asarray(candidate_features)):
        col = samples[:, int(j)]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        cut = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        if cut.size == 0:
            continue
        cum_w = np.cumsum(total_w[order], axis=0)
        left_counts = cum_w[cut]
        right_counts = parent_counts[None, :] - left_counts
        left_weight = left_counts.sum(axis=1)
        right_weight = parent_weight - left_weight

        left_sizes = cut + 1
        right_sizes = n - left_sizes
        valid = (left_sizes >= min_samples_leaf) & (right_sizes >= min_samples_leaf)
        if not valid.any():
            continue

        gains = (
            parent_impurity
            - (left_weight / parent_weight) * _impurity_rows(left_counts, criterion)
            - (right_weight / parent_weight) * _impurity_rows(right_counts, criterion)
        )
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[pos])
        if gain <= min_gain:
            continue
        if best is None or gain > best[2]:
            threshold = float(
                (sorted_vals[cut[pos]] + sorted_vals[cut[pos] + 1]) / 2.0
            )
            best = (int(j), threshold, max(gain, 0.0))
    return best


def _make_leaf(labels: np.ndarray, weights: np.ndarray, n_classes: int) -> Leaf:
    counts = np.bincount(labels, minlength=n_classes)
    weighted = np.bincount(labels, weights=weights, minlength=n_classes)
    return Leaf(
        class_counts=counts,
        weighted_counts=weighted,
        predicted_class=int(np.argmax(weighted)),
    )


def grow_tree(
    samples: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    params: TreeParams,
    sample_weights: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    n_candidate_features: int | None = None,
    depth: int = 0,
) -> TreeNode:
    """Recursive greedy construction.

    When no split has positive gain but the node is still impure (XOR-like
    geometry), a zero-gain split is taken so consistent data is always fit
    exactly; recursion still terminates because both children are nonempty.
    """
    n, n_features = samples.shape
    weights = (
        np.ones(n, dtype=np.float64)
        if sample_weights is None
        else np.asarray(sample_weights, dtype=np.float64)
    )
    pure = np.unique(labels).size <= 1
    depth_reached = params.max_depth is not None and depth >= params.max_depth
    if pure or depth_reached or n < params.min_samples_split:
        return _make_leaf(labels, weights, n_classes)

    if n_candidate_features is not None and n_candidate_features < n_features:
        candidates = rng.choice(n_features, size=n_candidate_features, replace=False)
    else:
        candidates = np.arange(n_features)

    split = best_split(
        samples,
        labels,
        candidates,
        params.criterion,
        sample_weights=weights if sample_weights is not None else None,
        min_samples_leaf=params.min_samples_leaf,
    )
    if split is None:
        split = best_split(
            samples,
            labels,
            candidates,
            params.criterion,
            sample_weights=weights if sample_weights is not None else None,
            min_samples_leaf=params.min_samples_leaf,
            allow_zero_gain=True,
        )
    if split is None:
        return _make_leaf(labels, weights, n_classes)

    feature, threshold, _ = split
    go_left = samples[:, feature] <= threshold
    child_kwargs = dict(
        n_classes=n_classes,
        params=params,
        rng=rng,
        n_candidate_features=n_candidate_features,
        depth=depth + 1,
    )
    return Internal(
        feature_index=feature,
        threshold=threshold,
        left=grow_tree(
            samples[go_left],
            labels[go_left],
            sample_weights=weights[go_left] if sample_weights is not None else None,
            **child_kwargs,
        ),
        right=grow_tree(
            samples[~go_left],
            labels[~go_left],
            sample_weights=weights[~go_left] if sample_weights is not None else None,
            **child_kwargs,
        ),
    )


def train_decision_tree(
    d: Dataset,
    params: TreeParams = TreeParams(),
    sample_weights: np.ndarray | None = None,
):
    """Fit a single CART tree; weighted impurity when weights are given."""
    from .base import TrainedModel

    if d.n_samples == 0:
        raise EmptyDataset("cannot train a tree on an empty dataset")
    if sample_weights is not None:
        sample_weights = np.asarray(sample_weights, dtype=np.float64)
        validate_weights(sample_weights)
    root = grow_tree(
        d.features, d.labels, d.taxonomy.size, params, sample_weights=sample_weights
    )
    return TrainedModel(
        kind="decision_tree",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={
            "max_depth": params.max_depth,
            "min_samples_split": params.min_samples_split,
            "min_samples_leaf": params.min_samples_leaf,
            "criterion": params.criterion.value,
        },
        payload=root,
    )


def tree_predict(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Predicted class index per row."""
    out = np.zeros(X.shape[0], dtype=np.int64)
    _route(root, X, np.arange(X.shape[0]), out, None)
    return out


def tree_proba(root: TreeNode, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Leaf class frequencies per row (weighted frequencies when the tree
    was trained with weights, keeping argmax consistent with predict)."""
    out = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    _route(root, X, np.arange(X.shape[0]), None, out)
    return out


def _route(node, X, indices, hard_out, proba_out) -> None:
    if indices.size == 0:
        return
    if isinstance(node, Leaf):
        if hard_out is not None:
            hard_out[indices] = node.predicted_class
        if proba_out is not None:
            weighted = node.weighted_counts
            proba_out[indices] = weighted / weighted.sum()
        return
    go_left = X[indices, node.feature_index] <= node.threshold
    _route(node.left, X, indices[go_left], hard_out, proba_out)
    _route(node.right, X, indices[~go_left], hard_out, proba_out)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def count_internal_nodes(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + count_internal_nodes(node.left) + count_internal_nodes(node.right)


def iter_leaves(node: TreeNode):
    if isinstance(node, Leaf):
        yield node
    else:
        yield from iter_leaves(node.left)
        yield from iter_leaves(node.right)


def validate_weights(weights: np.ndarray) -> None:
    if (weights < 0).any() or weights.sum() <= 0:
        raise EmptyDataset("sample weights must be nonnegative with positive sum")
