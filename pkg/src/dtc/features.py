"""Filter-style feature scoring: information gain, Fisher's score, chi-square.

Information gain and chi-square need a categorical view of the continuous
flow features, so both go through equal-frequency (quantile) binning; the
Fisher score works on the raw values.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import EmptyInput, LengthMismatch, MaskedDataError, OutOfRange, SingleClass


class ScoreMethod(enum.Enum):
    INFO_GAIN = "infogain"
    FISHER = "fisher"
    CHI_SQUARE = "chi2"


@dataclass(frozen=True)
class FeatureScore:
    feature_index: int
    feature_name: str
    score: float
    method: ScoreMethod


@dataclass(frozen=True)
class BinningSpec:
    """Quantile cut points for one feature. Bin b holds x with
    edges[b-1] <= x < edges[b]; the rightmost bin is closed above."""

    n_bins: int
    edges: np.ndarray

    def assign(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.edges, values, side="right")

    @property
    def n_effective_bins(self) -> int:
        return len(self.edges) + 1


def entropy(labels: np.ndarray, n_classes: int) -> float:
    """Shannon entropy in bits of the empirical class distribution."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("entropy of an empty label vector")
    counts = np.bincount(labels, minlength=n_classes)
    p = counts[counts > 0] / labels.size
    return float(-(p * np.log2(p)).sum())


def equal_frequency_bins(values: np.ndarray, n_bins: int) -> BinningSpec:
    """Cut points at the interior quantiles, duplicates merged.

    Low-cardinality features end up with fewer effective bins; a constant
    vector collapses to a single bin.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("cannot bin an empty vector")
    n_bins = max(2, min(n_bins, len(np.unique(values))))
    qs = np.arange(1, n_bins) / n_bins
    edges = np.unique(np.quantile(values, qs))
    # an edge at (or below) the minimum would leave an always-empty first bin
    edges = edges[edges > values.min()]
    return BinningSpec(n_bins=n_bins, edges=edges)


def information_gain(
    feature: np.ndarray, labels: np.ndarray, n_classes: int, bins: BinningSpec
) -> float:
    """H(labels) minus the bin-weighted conditional entropy."""
    feature = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels)
    if feature.shape[0] != labels.shape[0]:
        raise LengthMismatch(
            f"feature has {feature.shape[0]} values, labels {labels.shape[0]}"
        )
    n = labels.size
    assignments = bins.assign(feature)
    conditional = 0.0
    for b in np.unique(assignments):
        member = labels[assignments == b]
        conditional += (member.size / n) * entropy(member, n_classes)
    gain = entropy(labels, n_classes) - conditional
    return max(0.0, float(gain))


def fisher_score(feature: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    """Between-class spread over pooled within-class variance.

    sum_c n_c (mu_c - mu)^2 / sum_c n_c var_c, population variances. A zero
    denominator with spread left over means a perfectly separating constant
    feature: +inf, the best possible score.
    """
    feature = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels)
    if feature.shape[0] != labels.shape[0]:
        raise LengthMismatch(
            f"feature has {feature.shape[0]} values, labels {labels.shape[0]}"
        )
    present = np.unique(labels)
    if present.size < 2:
        raise SingleClass("fisher score needs >= 2 classes present")
    mu = feature.mean()
    numerator = 0.0
    denominator = 0.0
    for c in present:
        group = feature[labels == c]
        numerator += group.size * (group.mean() - mu) ** 2
        denominator += group.size * group.var()
    if denominator == 0.0:
        return float("inf") if numerator > 0.0 else 0.0
    return float(numerator / denominator)


def chi_square_stat(
    feature: np.ndarray, labels: np.ndarray, n_classes: int, bins: BinningSpec
) -> float:
    """Chi-square statistic of the bin-by-class contingency table.

    Cells with zero expected count (empty bin or class) are skipped.
    """
    feature = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels)
    if feature.shape[0] != labels.shape[0]:
        raise LengthMismatch(
            f"feature has {feature.shape[0]} values, labels {labels.shape[0]}"
        )
    n = labels.size
    assignments = bins.assign(feature)
    observed = np.zeros((bins.n_effective_bins, n_classes), dtype=np.float64)
    np.add.at(observed, (assignments, labels), 1.0)
    row = observed.sum(axis=1, keepdims=True)
    col = observed.sum(axis=0, keepdims=True)
    expected = row @ col / n
    nonzero = expected > 0.0
    stat = ((observed[nonzero] - expected[nonzero]) ** 2 / expected[nonzero]).sum()
    return float(stat)


def rank_features(d: Dataset, method: ScoreMethod, n_bins: int = 10) -> list[FeatureScore]:
    """Score every feature and sort descending; +inf sorts first and ties
    break on ascending column index so rankings are reproducible."""
    if d.missing_mask.any():
        raise MaskedDataError("rank_features needs an imputed dataset")
    k = d.taxonomy.size
    scores = []
    for j in range(d.n_features):
        col = d.features[:, j]
        if method is ScoreMethod.FISHER:
            value = fisher_score(col, d.labels, k)
        else:
            bins = equal_frequency_bins(col, n_bins)
            if method is ScoreMethod.INFO_GAIN:
                value = information_gain(col, d.labels, k, bins)
            else:
                value = chi_square_stat(col, d.labels, k, bins)
        scores.append(
            FeatureScore(
                feature_index=j,
                feature_name=d.feature_names[j],
                score=value,
                method=method,
            )
        )
    scores.sort(key=lambda s: (-s.score, s.feature_index))
    return scores


def select_top_k(ranking: list[FeatureScore], k: int) -> list[int]:
    """First k feature indices of the ranking, in ranking order."""
    if not 1 <= k <= len(ranking):
        raise OutOfRange(f"k={k} outside [1, {len(ranking)}]")
    return [s.feature_index for s in ranking[:k]]


def ranking_to_csv(ranking: list[FeatureScore]) -> str:
    """Ranking export; infinity serialized as the literal "inf"."""
    out = io.StringIO()
    out.write("rank,feature_name,method,score\n")
    for rank, s in enumerate(ranking, start=1):
        score = "inf" if np.isinf(s.score) else repr(s.score)
        out.write(f"{rank},{s.feature_name},{s.method.value},{score}\n")
    return out.getvalue()
