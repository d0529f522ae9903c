"""Uniform fit/predict surface over the six learner kinds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..data import ClassTaxonomy
from ..errors import ShapeMismatch


@dataclass(frozen=True)
class TrainedModel:
    """A trained learner plus the taxonomy and feature subset it expects.

    `feature_subset` indexes the shared column namespace; prediction input
    must already be restricted to those columns, in that order.
    """

    kind: str
    taxonomy: ClassTaxonomy
    feature_subset: tuple[int, ...]
    hyperparams: dict[str, Any]
    payload: Any

    @property
    def n_classes(self) -> int:
        return self.taxonomy.size


def check_width(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_subset):
        got = X.shape[1] if X.ndim == 2 else None
        raise ShapeMismatch(
            f"model expects {len(model.feature_subset)} features, got {got}"
        )
    if not np.isfinite(X).all():
        raise ShapeMismatch("prediction input contains non-finite values")
    return X


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Class index per row: the argmax of predict_proba with lowest-index
    tie-break, except KNN which refines exact vote ties by neighbor
    distance before falling back to the class index."""
    from . import _dispatch_predict

    return _dispatch_predict(model, check_width(model, X))


def predict_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Per-row class probabilities, each row summing to 1."""
    from . import _dispatch_proba

    return _dispatch_proba(model, check_width(model, X))
