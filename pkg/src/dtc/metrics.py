"""Confusion matrices, the usual four metrics, cross-validation, and the
stage-wise comparison documents.

Macro averages are the headline numbers (minority classes count as much as
the majority); weighted averages ride along for comparison. A class never
predicted and never present gets precision = recall = F1 = 0 rather than a
division error, and still participates in the macro mean.
"""
from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass

import numpy as np

from .data import ClassTaxonomy, Dataset, Stage, fill_missing, kfold, median_fill_values
from .errors import EmptyMatrix, IndexOutOfRange, LengthMismatch
from .learners import predict
from .pipeline import StageArtifact, StageSpec, stage_transform, train_stage


class ReportFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"
    TEXT = "text"


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray       # rows = true class, columns = predicted class
    taxonomy: ClassTaxonomy

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
        }


def confusion_matrix(
    y_true: np.ndarray, y_pred: np.ndarray, taxonomy: ClassTaxonomy
) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(
            f"{y_true.shape[0]} true labels vs {y_pred.shape[0]} predictions"
        )
    k = taxonomy.size
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= k or y_pred.min() < 0 or y_pred.max() >= k
    ):
        raise IndexOutOfRange(f"label index outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts=counts, taxonomy=taxonomy)


def _safe_div(num: np.ndarray, denom: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    nonzero = denom > 0
    out[nonzero] = num[nonzero] / denom[nonzero]
    return out


def metrics_from_confusion(c: ConfusionMatrix) -> MetricsReport:
    counts = c.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix has no observations")
    tp = np.diag(counts)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    weighted = support / total
    return MetricsReport(
        accuracy=float(tp.sum() / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.astype(np.int64),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float((precision * weighted).sum()),
        weighted_recall=float((recall * weighted).sum()),
        weighted_f1=float((f1 * weighted).sum()),
    )


def micro_metrics(c: ConfusionMatrix) -> tuple[float, float]:
    """(micro precision, micro recall); for single-label multiclass both
    equal accuracy, which the test suite uses as an identity check."""
    counts = c.counts.astype(np.float64)
    tp = np.diag(counts).sum()
    fp = counts.sum(axis=0).sum() - tp
    fn = counts.sum(axis=1).sum() - tp
    micro_p = tp / (tp + fp) if tp + fp > 0 else 0.0
    micro_r = tp / (tp + fn) if tp + fn > 0 else 0.0
    return float(micro_p), float(micro_r)


def evaluate_model(model, X: np.ndarray, y: np.ndarray) -> MetricsReport:
    return metrics_from_confusion(
        confusion_matrix(y, predict(model, X), model.taxonomy)
    )


# -- cross-validation --------------------------------------------------------

SUMMARY_METRICS = (
    "accuracy",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "weighted_precision",
    "weighted_recall",
    "weighted_f1",
)


@dataclass(frozen=True)
class CrossValidationResult:
    fold_reports: list[MetricsReport]
    mean: dict[str, float]
    stddev: dict[str, float]


def cross_validate(
    d: Dataset, spec: StageSpec, k: int, seed: int, n_threads: int = 1
) -> CrossValidationResult:
    """Stratified k-fold with the whole stage recipe refit inside each fold.

    Imputation fill values, the normalizer, and the feature ranking are all
    fitted on the training folds only and merely applied to the held-out
    fold.
    """
    plans = kfold(d, k, seed)
    reports = []
    for plan in plans:
        train_part = d.subset(plan.train_indices)
        test_part = d.subset(plan.test_indices)
        fills = median_fill_values(train_part)
        train_filled = fill_missing(train_part, fills)
        test_filled = fill_missing(test_part, fills)
        model, normalizer, selected = train_stage(
            train_filled, spec, seed, n_threads
        )
        artifact = StageArtifact(
            spec=spec, model=model, normalizer=normalizer,
            selected_features=tuple(selected),
        )
        y_pred = predict(model, stage_transform(artifact, test_filled.features))
        reports.append(
            metrics_from_confusion(
                confusion_matrix(test_filled.labels, y_pred, model.taxonomy)
            )
        )
    mean, stddev = {}, {}
    for name in SUMMARY_METRICS:
        values = np.array([getattr(r, name) for r in reports])
        mean[name] = float(values.mean())
        stddev[name] = float(values.std())  # population stddev across folds
    return CrossValidationResult(fold_reports=reports, mean=mean, stddev=stddev)


# -- stage-wise comparison documents ------------------------------------------

STAGE_LABELS = {
    Stage.STAGE_I: "DTC1",
    Stage.STAGE_II: "DTC2",
    Stage.STAGE_III: "DTC3",
}

COMPARISON_HEADER = ("algorithm", "stage", "accuracy", "f1", "precision", "recall")


def _pct(value: float) -> str:
    return f"{100.0 * value:.4f}"


def sort_rows(rows: list[dict]) -> list[dict]:
    """Stage ascending, accuracy descending, algorithm name as final tie."""
    return sorted(
        rows, key=lambda r: (r["stage"], -float(r["accuracy"]), r["algorithm"])
    )


def comparison_rows(results: list[tuple[str, str, MetricsReport]]) -> list[dict]:
    """Dict rows with fixed 4-decimal percentages, sorted for emission."""
    rows = [
        {
            "algorithm": alg,
            "stage": stage,
            "accuracy": _pct(rep.accuracy),
            "f1": _pct(rep.macro_f1),
            "precision": _pct(rep.macro_precision),
            "recall": _pct(rep.macro_recall),
        }
        for alg, stage, rep in results
    ]
    return sort_rows(rows)


def render_rows(rows: list[dict], format: ReportFormat = ReportFormat.CSV) -> str:
    """Serialize pre-sorted comparison rows; byte output is a pure function
    of the rows."""
    cells = [[row[h] for h in COMPARISON_HEADER] for row in rows]
    if format is ReportFormat.CSV:
        out = io.StringIO()
        out.write(",".join(COMPARISON_HEADER) + "\n")
        for row in cells:
            out.write(",".join(row) + "\n")
        return out.getvalue()
    if format is ReportFormat.JSON:
        payload = [dict(zip(COMPARISON_HEADER, row)) for row in cells]
        return json.dumps(payload, indent=2) + "\n"
    widths = [
        max(len(header), *(len(row[i]) for row in cells)) if cells else len(header)
        for i, header in enumerate(COMPARISON_HEADER)
    ]
    out = io.StringIO()
    out.write(
        "  ".join(h.ljust(w) for h, w in zip(COMPARISON_HEADER, widths)).rstrip() + "\n"
    )
    for row in cells:
        out.write("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() + "\n")
    return out.getvalue()


def emit_comparison(
    results: list[tuple[str, str, MetricsReport]],
    format: ReportFormat = ReportFormat.CSV,
) -> str:
    return render_rows(comparison_rows(results), format)
