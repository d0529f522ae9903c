"""Gaussian naive Bayes with a relative variance floor."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import EmptyDataset
from .base import TrainedModel

VARIANCE_FLOOR_SCALE = 1e-9
ABSOLUTE_FLOOR = 1e-12


@dataclass
class NaiveBayesModel:
    class_priors: np.ndarray   # (K,)
    means: np.ndarray          # (K, F)
    variances: np.ndarray      # (K, F), all > 0


def train_gaussian_nb(d: Dataset) -> TrainedModel:
    if d.n_samples == 0:
        raise EmptyDataset("cannot fit naive Bayes on an empty dataset")
    n, f, k = d.n_samples, d.n_features, d.taxonomy.size
    floor = VARIANCE_FLOOR_SCALE * float(d.features.var(axis=0).max())
    if floor <= 0.0:
        floor = ABSOLUTE_FLOOR

    priors = np.bincount(d.labels, minlength=k) / n
    means = np.zeros((k, f), dtype=np.float64)
    variances = np.full((k, f), floor, dtype=np.float64)
    for c in range(k):
        rows = d.features[d.labels == c]
        if rows.shape[0] == 0:
            continue
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), floor)

    model = NaiveBayesModel(class_priors=priors, means=means, variances=variances)
    return TrainedModel(
        kind="gaussian_nb",
        taxonomy=d.taxonomy,
        feature_subset=tuple(range(d.n_features)),
        hyperparams={},
        payload=model,
    )


def gaussian_nb_proba(model: NaiveBayesModel, X: np.ndarray) -> np.ndarray:
    """Normalized posteriors from log prior plus summed log densities."""
    with np.errstate(divide="ignore"):
        log_prior = np.log(model.class_priors)
    k = model.class_priors.size
    log_post = np.empty((X.shape[0], k), dtype=np.float64)
    for c in range(k):
        var = model.variances[c]
        log_density = (
            -0.5 * np.log(2.0 * np.pi * var)
            - (X - model.means[c]) ** 2 / (2.0 * var)
        ).sum(axis=1)
        log_post[:, c] = log_prior[c] + log_density
    shifted = log_post - log_post.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
