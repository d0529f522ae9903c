import numpy as np
import pytest

from dtc.data import ClassTaxonomy, Dataset, Stage


def make_dataset(features, labels, n_classes=None, stage=Stage.CUSTOM, names=None):
    """Dataset from plain arrays, custom taxonomy sized to the labels."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if names is None:
        k = n_classes or int(labels.max()) + 1
        names = tuple(f"c{i}" for i in range(k))
    taxonomy = ClassTaxonomy(stage, tuple(names))
    return Dataset(
        features=features,
        missing_mask=np.zeros(features.shape, dtype=bool),
        feature_names=tuple(f"f{j}" for j in range(features.shape[1])),
        labels=labels,
        taxonomy=taxonomy,
    )


@pytest.fixture
def csv_file(tmp_path):
    def write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
