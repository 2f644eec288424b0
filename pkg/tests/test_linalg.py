import numpy as np
import pytest

from errors import NotSymmetricError, DimensionMismatchError
from utils.linalg import as_square, check_symmetric, symmetric_psd


class TestCheckSymmetric:

    def test_tolerance_scales_with_small_entries(self):
        M = 1e-9 * np.eye(2)
        M[0, 1] = 1e-10
        with pytest.raises(NotSymmetricError):
            check_symmetric(M)

    def test_tolerance_scales_with_large_entries(self):
        M = 1e6 * np.eye(2)
        M[0, 1] = 1e-7
        np.testing.assert_allclose(check_symmetric(M), [[1e6, 5e-8], [5e-8, 1e6]])

    def test_zero_matrix(self):
        np.testing.assert_array_equal(check_symmetric(np.zeros((3, 3))), np.zeros((3, 3)))


class TestSymmetricPSD:

    def test_accepts_gram(self, rng):
        X = rng.normal(size=(5, 3))
        M = symmetric_psd(X.T @ X)
        np.testing.assert_array_equal(M, M.T)

    def test_rejects_indefinite(self):
        with pytest.raises(NotSymmetricError):
            symmetric_psd([[0.0, 1.0], [1.0, 0.0]])

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatchError):
            as_square(np.ones((2, 3)))
