"""Random forest: bootstrap-resampled CART trees with per-split feature
subsampling and majority voting."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset
from .base import TrainedModel
from .tree import TreeNode, TreeParams, grow_tree, tree_predict


@dataclass
class ForestModel:
    trees: list[TreeNode]
    n_features_per_split: int
    seed: int
    oob_indices: list[np.ndarray] | None


def default_candidates(n_features: int) -> int:
    return max(1, round(np.sqrt(n_features)))


def train_random_forest(
    d: Dataset,
    params: TreeParams = TreeParams(),
    n_trees: int = 100,
    seed: int = 0,
    bootstrap: bool = True,
    n_features_per_split: int | None = None,
    n_threads: int = 1,
    sample_weights: np.ndarray | None = None,
) -> TrainedModel:
    """Each tree gets its own generator spawned from the master seed, so the
    forest is identical no matter how many threads build it."""
    if d.n_samples == 0:
        raise EmptyDataset("cannot train a forest on an empty dataset")
    n = d.n_samples
    m = n_features_per_split or default_candidates(d.n_features)
    children = np.random.SeedSequence(seed).spawn(n_trees)

    def build(child_seq) -> tuple[TreeNode, np.ndarray]:
        rng = np.random.default_rng(child_seq)
        if bootstrap:
            sample = rng.integers(0, n, size=n)
            oob = np.setdiff1d(np.arange(n), sample)
        else:
            sample = np.arange(n)
            oob = np.array([], dtype=np.intp)
        root = grow_tree(
            d.features[sample],
            d.labels[sample],
            d.taxonomy.size,
            params,
            sample_weights=None if sample_weights is None else sample_weights[sample],
            rng=rng,
            n_candidate_features=m,
        )
        return root, oob

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            built = list(pool.map(build, children))
    else:
        built = [build(c) for c in children]

    forest = ForestModel(
        trees=[root for root, _ in built],
        n_features_per_split=m,
        seed=seed,
        oob_indices=[oob for _, oob in built] if bootstrap else None,
    )
    return TrainedModel(
        kind="random_forest",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={
            "n_trees": n_trees,
            "seed": seed,
            "bootstrap": bootstrap,
            "n_features_per_split": m,
            "max_depth": params.max_depth,
            "min_samples_split": params.min_samples_split,
            "min_samples_leaf": params.min_samples_leaf,
            "criterion": params.criterion.value,
        },
        payload=forest,
    )


def forest_proba(forest: ForestModel, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Fraction of trees voting for each class."""
    votes = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    for root in forest.trees:
        pred = tree_predict(root, X)
        votes[np.arange(X.shape[0]), pred] += 1.0
    return votes / len(forest.trees)
