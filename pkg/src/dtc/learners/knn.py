"""K-nearest neighbors with Euclidean distance and deterministic tie-breaks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset, KTooLarge
from .base import TrainedModel

CHUNK_ROWS = 512


@dataclass
class KnnModel:
    train_features: np.ndarray
    train_labels: np.ndarray
    k: int


def train_knn(d: Dataset, k: int = 5) -> TrainedModel:
    if d.n_samples == 0:
        raise EmptyDataset("cannot fit KNN on an empty dataset")
    if k < 1 or k > d.n_samples:
        raise KTooLarge(f"k={k} outside [1, {d.n_samples}]")
    model = KnnModel(
        train_features=d.features.copy(), train_labels=d.labels.copy(), k=k
    )
    return TrainedModel(
        kind="knn",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={"k": k},
        payload=model,
    )


def _neighbors(model: KnnModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(indices, distances) of the k nearest training rows per query row.
    Distance ties at the boundary resolve to the lower training index."""
    train = model.train_features
    train_sq = (train * train).sum(axis=1)
    idx_out = np.empty((X.shape[0], model.k), dtype=np.int64)
    dist_out = np.empty((X.shape[0], model.k), dtype=np.float64)
    for start in range(0, X.shape[0], CHUNK_ROWS):
        chunk = X[start : start + CHUNK_ROWS]
        d2 = (
            (chunk * chunk).sum(axis=1)[:, None]
            + train_sq[None, :]
            - 2.0 * chunk @ train.T
        )
        np.maximum(d2, 0.0, out=d2)
        order = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        idx_out[start : start + CHUNK_ROWS] = order
        dist_out[start : start + CHUNK_ROWS] = np.sqrt(
            np.take_along_axis(d2, order, axis=1)
        )
    return idx_out, dist_out


def knn_proba(model: KnnModel, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Neighbor vote fractions."""
    idx, _ = _neighbors(model, X)
    votes = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    neighbor_labels = model.train_labels[idx]
    for c in range(n_classes):
        votes[:, c] = (neighbor_labels == c).sum(axis=1)
    return votes / model.k


def knn_predict(model: KnnModel, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Majority label among the k nearest; vote ties go to the class with
    the smaller summed distance, then the lower class index."""
    idx, dist = _neighbors(model, X)
    neighbor_labels = model.train_labels[idx]
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        counts = np.bincount(neighbor_labels[i], minlength=n_classes)
        top = counts.max()
        tied = np.nonzero(counts == top)[0]
        if tied.size == 1:
            out[i] = tied[0]
            continue
        sums = [
            dist[i][neighbor_labels[i] == c].sum() for c in tied
        ]
        out[i] = int(tied[int(np.argmin(sums))])  # argmin: first = lowest class
    return out
