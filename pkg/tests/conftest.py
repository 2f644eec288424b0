import numpy as np
import pytest

from models.dataset import PartiallyLabeledDataset


@pytest.fixture
def write_csv(tmp_path):
    """Write raw CSV text to a file and return its path"""

    def _write(text, name='data.csv'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_dataset(rng):
    """10 x 4 dataset, first 6 rows labeled"""
    X = rng.uniform(-1.0, 1.0, size=(10, 4))
    y = X[:6] @ np.array([1.0, -0.5, 0.0, 0.0]) + rng.uniform(-0.1, 0.1, size=6)
    return PartiallyLabeledDataset(features=X, labels=y)


@pytest.fixture
def random_psd(rng):
    def _make(p, rank=None):
        A = rng.normal(size=(p, rank or p))
        return A @ A.T / (rank or p)

    return _make
