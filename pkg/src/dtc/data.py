"""Flow-feature CSV ingestion, cleaning, normalization, label encoding, splits.

Datasets arrive as CICFlowMeter-style CSVs: one header row, numeric flow
statistics, and one or more string label columns. Everything downstream
works on the float matrix produced here.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptyDataset,
    FormatError,
    IoError,
    MaskedDataError,
    NonNumericCell,
    TooFewSamples,
    UnknownColumn,
    UnknownLabel,
)

# CICFlowMeter emits these for undefined flow statistics.
DEFAULT_MISSING_TOKENS = ("NaN", "Infinity", "-Infinity", "inf", "")

STAGE1_NAMES = ("Benign", "Malicious")
STAGE2_NAMES = ("Tor", "Non-Tor", "VPN", "Non-VPN")
STAGE3_NAMES = (
    "File transfer",
    "Audio stream",
    "P2P",
    "Browsing",
    "Video stream",
    "Chat",
    "Email",
    "VoIP",
)


class Stage(enum.Enum):
    STAGE_I = "StageI"
    STAGE_II = "StageII"
    STAGE_III = "StageIII"
    CUSTOM = "Custom"


class NormMethod(enum.Enum):
    MINMAX = "minmax"
    ZSCORE = "zscore"


class ImputeStrategy(enum.Enum):
    MEDIAN_PER_FEATURE = "median"
    DROP_ROW = "drop"


@dataclass(frozen=True)
class ClassTaxonomy:
    """Closed label set for one classification stage."""

    stage: Stage
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("taxonomy names must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int | None:
        lowered = name.strip().lower()
        for i, candidate in enumerate(self.names):
            if candidate.lower() == lowered:
                return i
        return None

    @classmethod
    def for_stage(cls, stage: Stage) -> "ClassTaxonomy":
        if stage is Stage.STAGE_I:
            return cls(stage, STAGE1_NAMES)
        if stage is Stage.STAGE_II:
            return cls(stage, STAGE2_NAMES)
        if stage is Stage.STAGE_III:
            return cls(stage, STAGE3_NAMES)
        raise ValueError("custom taxonomies need explicit names")


@dataclass(frozen=True)
class RawTable:
    """Parsed CSV: header plus string cells, in file order."""

    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    source_path: str

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        try:
            j = self.header.index(name)
        except ValueError:
            raise UnknownColumn(f"no column named {name!r}") from None
        return [row[j] for row in self.rows]


@dataclass(frozen=True)
class Dataset:
    """Dense float matrix with a missing-value mask and encoded labels."""

    features: np.ndarray
    missing_mask: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    taxonomy: ClassTaxonomy

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return replace(
            self,
            features=self.features[idx],
            missing_mask=self.missing_mask[idx],
            labels=self.labels[idx],
        )

    def label_names(self) -> list[str]:
        return [self.taxonomy.names[i] for i in self.labels]


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature (min, max) for minmax or (mean, stddev) for zscore."""

    method: NormMethod
    per_feature: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int


def load_flow_csv(path: str, delimiter: str = ",") -> RawTable:
    """Parse an RFC-4180-style CSV into a RawTable.

    The first line is the header; names are whitespace-trimmed and any BOM is
    stripped. Rows whose cell count disagrees with the header raise
    FormatError naming the offending line.
    """
    try:
        fh = open(path, "r", encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header_cells = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = tuple(h.strip() for h in header_cells)
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise FormatError(f"{path}: duplicate header names {dupes}")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue  # tolerate blank lines
            if len(cells) != len(header):
                raise FormatError(
                    f"{path}: line {lineno} has {len(cells)} cells, "
                    f"expected {len(header)}"
                )
            rows.append(tuple(cells))
    return RawTable(header=header, rows=tuple(rows), source_path=str(path))


def _parse_cell(cell: str, missing_tokens: frozenset[str]) -> tuple[float, bool]:
    """Return (value, missing). Non-finite parses count as missing so the
    dataset invariant (finite wherever unmasked) always holds."""
    text = cell.strip()
    if text in missing_tokens:
        return 0.0, True
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(f"cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        return 0.0, True
    return value, False


def to_dataset(
    table: RawTable,
    feature_columns: list[str],
    label_column: str,
    taxonomy: ClassTaxonomy,
    label_aliases: dict[str, str] | None = None,
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS,
) -> Dataset:
    """Extract numeric features and encode labels against a closed taxonomy.

    Label cells are matched case-insensitively after alias lookup; cells that
    map to no taxonomy name raise UnknownLabel with the row number.
    """
    header_index = {name: j for j, name in enumerate(table.header)}
    for name in list(feature_columns) + [label_column]:
        if name not in header_index:
            raise UnknownColumn(f"no column named {name!r}")
    alias_lookup = {
        key.strip().lower(): value for key, value in (label_aliases or {}).items()
    }
    tokens = frozenset(missing_tokens)

    n, f = table.n_rows, len(feature_columns)
    features = np.zeros((n, f), dtype=np.float64)
    mask = np.zeros((n, f), dtype=bool)
    labels = np.zeros(n, dtype=np.int64)
    feat_idx = [header_index[name] for name in feature_columns]
    label_idx = header_index[label_column]

    for i, row in enumerate(table.rows):
        for j, col in enumerate(feat_idx):
            try:
                features[i, j], mask[i, j] = _parse_cell(row[col], tokens)
            except NonNumericCell as exc:
                raise NonNumericCell(
                    f"row {i + 1}, column {feature_columns[j]!r}: {exc}"
                ) from None
        raw_label = row[label_idx].strip()
        resolved = alias_lookup.get(raw_label.lower(), raw_label)
        encoded = taxonomy.index_of(resolved)
        if encoded is None:
            raise UnknownLabel(
                f"row {i + 1}: label {raw_label!r} not in taxonomy "
                f"{list(taxonomy.names)}"
            )
        labels[i] = encoded

    if n < 1:
        raise EmptyDataset("table has no data rows")
    return Dataset(
        features=features,
        missing_mask=mask,
        feature_names=tuple(feature_columns),
        labels=labels,
        taxonomy=taxonomy,
    )


def median_fill_values(d: Dataset) -> np.ndarray:
    """Per-column median of unmasked cells; 0.0 for fully masked columns."""
    fills = np.zeros(d.n_features, dtype=np.float64)
    for j in range(d.n_features):
        col = d.features[~d.missing_mask[:, j], j]
        if col.size:
            fills[j] = float(np.median(col))
    return fills


def fill_missing(d: Dataset, fill_values: np.ndarray) -> Dataset:
    """Replace masked cells with the given per-column values."""
    if not d.missing_mask.any():
        return replace(d, missing_mask=np.zeros_like(d.missing_mask))
    features = d.features.copy()
    rows, cols = np.nonzero(d.missing_mask)
    features[rows, cols] = fill_values[cols]
    return replace(d, features=features, missing_mask=np.zeros_like(d.missing_mask))


def impute_missing(d: Dataset, strategy: ImputeStrategy) -> Dataset:
    """Remove the missing-value mask, by median fill or row dropping."""
    if strategy is ImputeStrategy.MEDIAN_PER_FEATURE:
        return fill_missing(d, median_fill_values(d))
    keep = ~d.missing_mask.any(axis=1)
    if not keep.any():
        raise EmptyDataset("drop-row imputation removed every row")
    return Dataset(
        features=d.features[keep],
        missing_mask=np.zeros((int(keep.sum()), d.n_features), dtype=bool),
        feature_names=d.feature_names,
        labels=d.labels[keep],
        taxonomy=d.taxonomy,
    )


def fit_normalizer(d: Dataset, method: NormMethod) -> NormalizationParams:
    """Fit per-feature normalization statistics on (training) data."""
    _require_unmasked(d)
    pairs = []
    for j in range(d.n_features):
        col = d.features[:, j]
        if method is NormMethod.MINMAX:
            pairs.append((float(col.min()), float(col.max())))
        else:
            pairs.append((float(col.mean()), float(col.std())))  # population stddev
    return NormalizationParams(method=method, per_feature=tuple(pairs))


def apply_normalizer(d: Dataset, params: NormalizationParams) -> Dataset:
    """Transform features with previously fitted parameters. No clipping:
    test data may land outside [0, 1] under minmax."""
    _require_unmasked(d)
    if len(params.per_feature) != d.n_features:
        raise MaskedDataError(
            f"normalizer covers {len(params.per_feature)} features, "
            f"dataset has {d.n_features}"
        )
    out = np.empty_like(d.features)
    for j, (a, b) in enumerate(params.per_feature):
        col = d.features[:, j]
        if params.method is NormMethod.MINMAX:
            span = b - a
            out[:, j] = 0.0 if span == 0.0 else (col - a) / span
        else:
            out[:, j] = 0.0 if b == 0.0 else (col - a) / b
    return replace(d, features=out)


def _require_unmasked(d: Dataset) -> None:
    if d.missing_mask.any():
        raise MaskedDataError("dataset still has masked cells; impute first")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(d: Dataset, test_fraction: float, seed: int) -> SplitPlan:
    """Seeded per-class holdout split.

    Each class contributes round(count * test_fraction) test rows, adjusted
    so it always keeps at least one training row; the overall test side is
    never left empty.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    class_indices = _indices_by_class(d)
    for c, idx in class_indices.items():
        if len(idx) < 2:
            raise TooFewSamples(
                f"class {d.taxonomy.names[c]!r} has {len(idx)} sample(s), needs >= 2"
            )
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in sorted(class_indices):
        idx = class_indices[c]
        shuffled = idx[rng.permutation(len(idx))]
        n_test = _round_half_up(len(idx) * test_fraction)
        n_test = min(n_test, len(idx) - 1)  # keep >= 1 training row
        test.extend(shuffled[:n_test])
        train.extend(shuffled[n_test:])
    if not test:
        # fractions so small every class rounded to zero: move one row over
        largest = max(class_indices, key=lambda c: len(class_indices[c]))
        for pos in range(len(train) - 1, -1, -1):
            if d.labels[train[pos]] == largest:
                test.append(train.pop(pos))
                break
    return SplitPlan(
        train_indices=np.array(sorted(train), dtype=np.intp),
        test_indices=np.array(sorted(test), dtype=np.intp),
        seed=seed,
    )


def kfold(d: Dataset, k: int, seed: int) -> list[SplitPlan]:
    """Seeded stratified k-fold plans; test folds partition the index set."""
    if k < 2:
        raise ValueError("k must be >= 2")
    class_indices = _indices_by_class(d)
    for c, idx in class_indices.items():
        if len(idx) < k:
            raise TooFewSamples(
                f"class {d.taxonomy.names[c]!r} has {len(idx)} sample(s), needs >= {k}"
            )
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in sorted(class_indices):
        idx = class_indices[c]
        shuffled = idx[rng.permutation(len(idx))]
        for pos, sample in enumerate(shuffled):
            folds[pos % k].append(int(sample))
    all_indices = set(range(d.n_samples))
    plans = []
    for fold in folds:
        test = sorted(fold)
        train = sorted(all_indices.difference(fold))
        plans.append(
            SplitPlan(
                train_indices=np.array(train, dtype=np.intp),
                test_indices=np.array(test, dtype=np.intp),
                seed=seed,
            )
        )
    return plans


def _indices_by_class(d: Dataset) -> dict[int, np.ndarray]:
    present = {}
    for c in np.unique(d.labels):
        present[int(c)] = np.nonzero(d.labels == c)[0]
    return present
