import numpy as np
import pytest

from speechscreen.dataset import FeatureCatalog, Label, LabeledDataset, SourceSet


def make_dataset(X, labels, subjects=None, names=None, source=SourceSet.OTHER, split_tag=None):
    """Small-dataset builder for tests."""
    X = np.asarray(X, dtype=np.float64)
    if subjects is None:
        subjects = tuple(f"s{i:03d}" for i in range(X.shape[0]))
    if names is None:
        names = tuple(f"f{j:03d}" for j in range(X.shape[1]))
    return LabeledDataset(
        subjects=tuple(subjects),
        X=X,
        y=tuple(labels),
        catalog=FeatureCatalog(tuple((n, source) for n in names)),
        split_tag=split_tag,
    )


def two_cluster_dataset(n_per_class=5, n_features=2, gap=6.0, seed=0):
    """Two well-separated Gaussian clusters; control at origin, AD shifted."""
    rng = np.random.default_rng(seed)
    X_control = rng.standard_normal((n_per_class, n_features)) * 0.3
    X_ad = rng.standard_normal((n_per_class, n_features)) * 0.3 + gap
    X = np.vstack([X_control, X_ad])
    labels = (Label.CONTROL,) * n_per_class + (Label.AD,) * n_per_class
    return make_dataset(X, labels)


@pytest.fixture
def clusters():
    return two_cluster_dataset()
