"""Seeded synthetic flow datasets with hierarchical 2/4/8 labels.

Eight Gaussian leaf clusters, one per application class, laid out so the
three label bits (benign/malicious, tunnel family, application) are each
carried by dedicated informative dimensions plus per-leaf offsets. The
benign/malicious bit is deliberately spread over three overlapping
dimensions: no single axis threshold separates it cleanly, but a handful of
them combined do, which is the regime boosting is supposed to win in.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import (
    ClassTaxonomy,
    Dataset,
    Stage,
    STAGE1_NAMES,
    STAGE2_NAMES,
    STAGE3_NAMES,
)

N_LEAVES = 8
GATE_SHIFT = 3.0        # benign/malicious bit, dims 0..2
FAMILY_SHIFT = 3.5      # tunnel-family bit, dims 3..4
APP_SHIFT = 3.5         # application bit, dims 5..6
OFFSET_RANGE = 1.0
MIN_LEAF_SEPARATION = 4.5
NOISE_SCALE = 0.8

# leaf index = b0*4 + b1*2 + b2 -> (stage2 index, stage3 index)
_LEAF_STAGE2 = (1, 1, 3, 3, 0, 0, 2, 2)   # Non-Tor, Non-VPN, Tor, VPN
_LEAF_STAGE3 = (3, 6, 0, 4, 2, 5, 1, 7)


@dataclass(frozen=True)
class SyntheticData:
    features: np.ndarray
    stage1: np.ndarray
    stage2: np.ndarray
    stage3: np.ndarray
    feature_names: tuple[str, ...]

    def dataset(self, stage: Stage) -> Dataset:
        labels = {
            Stage.STAGE_I: self.stage1,
            Stage.STAGE_II: self.stage2,
            Stage.STAGE_III: self.stage3,
        }[stage]
        return Dataset(
            features=self.features.copy(),
            missing_mask=np.zeros(self.features.shape, dtype=bool),
            feature_names=self.feature_names,
            labels=labels.copy(),
            taxonomy=ClassTaxonomy.for_stage(stage),
        )


def _leaf_centers(rng: np.random.Generator, n_informative: int) -> np.ndarray:
    for _ in range(1000):
        centers = rng.uniform(-OFFSET_RANGE, OFFSET_RANGE, size=(N_LEAVES, n_informative))
        for leaf in range(N_LEAVES):
            b0, b1, b2 = (leaf >> 2) & 1, (leaf >> 1) & 1, leaf & 1
            centers[leaf, 0:3] += GATE_SHIFT * b0
            centers[leaf, 3:5] += FAMILY_SHIFT * b1
            centers[leaf, 5:7] += APP_SHIFT * b2
        gaps = [
            np.linalg.norm(centers[a] - centers[b])
            for a in range(N_LEAVES)
            for b in range(a + 1, N_LEAVES)
        ]
        if min(gaps) >= MIN_LEAF_SEPARATION:
            return centers
    raise RuntimeError("could not place leaf clusters; loosen the separation")


def hierarchical_dataset(
    n_rows: int = 5000,
    n_features: int = 20,
    n_informative: int = 8,
    majority_fraction: float = 0.9,
    seed: int = 7,
) -> SyntheticData:
    """Draw rows from the eight leaf clusters with a 9:1 benign/malicious
    split (at the defaults) and append label-independent noise features."""
    if n_informative < 7 or n_features < n_informative:
        raise ValueError("need >= 7 informative dims inside n_features")
    rng = np.random.default_rng(seed)
    centers = _leaf_centers(rng, n_informative)

    probs = np.empty(N_LEAVES)
    probs[:4] = majority_fraction / 4.0       # benign leaves (b0 = 0)
    probs[4:] = (1.0 - majority_fraction) / 4.0
    leaves = rng.choice(N_LEAVES, size=n_rows, p=probs)

    features = np.empty((n_rows, n_features), dtype=np.float64)
    features[:, :n_informative] = centers[leaves] + rng.normal(
        0.0, NOISE_SCALE, size=(n_rows, n_informative)
    )
    features[:, n_informative:] = rng.normal(
        0.0, 1.0, size=(n_rows, n_features - n_informative)
    )

    stage1 = (leaves >> 2) & 1
    stage2 = np.array([_LEAF_STAGE2[l] for l in leaves], dtype=np.int64)
    stage3 = np.array([_LEAF_STAGE3[l] for l in leaves], dtype=np.int64)
    names = tuple(f"flow_stat_{j:02d}" for j in range(n_features))
    return SyntheticData(
        features=features,
        stage1=stage1.astype(np.int64),
        stage2=stage2,
        stage3=stage3,
        feature_names=names,
    )


def write_csv(
    data: SyntheticData,
    path: str,
    missing_fraction: float = 0.0,
    seed: int = 0,
) -> None:
    """Write the dataset as a flow-feature CSV with three label columns;
    optionally replace a sprinkle of cells with CICFlowMeter-style missing
    tokens so ingestion paths can be exercised."""
    rng = np.random.default_rng(seed)
    tokens = ("NaN", "Infinity", "-Infinity")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            list(data.feature_names) + ["stage1_label", "stage2_label", "stage3_label"]
        )
        for i in range(data.features.shape[0]):
            cells = [repr(v) for v in data.features[i]]
            if missing_fraction > 0.0:
                for j in range(len(cells)):
                    if rng.random() < missing_fraction:
                        cells[j] = str(rng.choice(tokens))
            writer.writerow(
                cells
                + [
                    STAGE1_NAMES[data.stage1[i]],
                    STAGE2_NAMES[data.stage2[i]],
                    STAGE3_NAMES[data.stage3[i]],
                ]
            )
