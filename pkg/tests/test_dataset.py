import numpy as np
import pytest

from errors import DatasetFormatError, ConstantColumnError, ScopeError
from models.dataset import Bounds, PartiallyLabeledDataset, Scope
from services.dataset import load_dataset, center_scale, gram, labeled_moment, infer_bounds


class TestLoadDataset:

    def test_trailing_unlabeled_row(self, write_csv):
        path = write_csv("x1,x2,y\n1,0,2\n0,1,0\n1,1,\n")
        d = load_dataset(path)
        assert (d.n, d.N, d.p, d.m) == (2, 3, 2, 1)
        np.testing.assert_array_equal(d.labels, [2.0, 0.0])

    def test_malformed_field_names_row_and_column(self, write_csv):
        path = write_csv("x1,x2,y\n1.0,abc,0.5\n")
        with pytest.raises(DatasetFormatError) as excinfo:
            load_dataset(path)
        assert excinfo.value.row == 1
        assert excinfo.value.column == 'x2'
        assert 'row 1' in str(excinfo.value)

    def test_fully_labeled(self, write_csv):
        d = load_dataset(write_csv("x1,y\n1,1\n-1,0\n"))
        assert d.n == d.N == 2
        assert d.m == 0

    def test_labeled_after_unlabeled(self, write_csv):
        path = write_csv("x1,y\n1,1\n2,\n3,0.5\n")
        with pytest.raises(DatasetFormatError, match='labeled rows must come first'):
            load_dataset(path)

    def test_no_labels(self, write_csv):
        with pytest.raises(DatasetFormatError, match='no labeled rows'):
            load_dataset(write_csv("x1,y\n1,\n2,\n"))

    def test_short_row(self, write_csv):
        with pytest.raises(DatasetFormatError, match='column count'):
            load_dataset(write_csv("x1,x2,y\n1,2,3\n1,2\n"))

    def test_bad_header(self, write_csv):
        with pytest.raises(DatasetFormatError, match='Header'):
            load_dataset(write_csv("a,b\n1,2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(str(tmp_path / 'absent.csv'))

    def test_bounds_are_checked(self, write_csv):
        path = write_csv("x1,y\n2,1\n")
        with pytest.raises(DatasetFormatError, match='B_X'):
            load_dataset(path, bounds=Bounds(B_X=1.0, B_Y=1.0))


class TestCenterScale:

    def test_two_point_column(self):
        d = PartiallyLabeledDataset(features=[[1.0], [3.0]], labels=[1.0, 3.0])
        out = center_scale(d)
        np.testing.assert_allclose(out.features[:, 0], [-1.0, 1.0])
        np.testing.assert_allclose(out.labels, [-1.0, 1.0])
        np.testing.assert_allclose(out.transform.feature_mean, [2.0])
        np.testing.assert_allclose(out.transform.feature_scale, [1.0])
        assert out.transform.labels_scaled is False

    def test_constant_column(self):
        d = PartiallyLabeledDataset(features=[[5.0, 1.0], [5.0, 2.0]], labels=[0.0])
        with pytest.raises(ConstantColumnError) as excinfo:
            center_scale(d)
        assert excinfo.value.column == 'x1'

    def test_idempotent(self, random_dataset):
        once = center_scale(random_dataset)
        twice = center_scale(once)
        np.testing.assert_allclose(twice.features, once.features, atol=1e-10)
        np.testing.assert_allclose(twice.labels, once.labels, atol=1e-10)
        # the composed map equals the first one
        np.testing.assert_allclose(twice.transform.feature_mean, once.transform.feature_mean, atol=1e-10)
        np.testing.assert_allclose(twice.transform.feature_scale, once.transform.feature_scale, atol=1e-10)

    def test_moments(self, random_dataset):
        out = center_scale(random_dataset)
        np.testing.assert_allclose(out.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose((out.features ** 2).mean(axis=0), 1.0, atol=1e-12)
        assert abs(out.labels.mean()) < 1e-12
        assert out.bounds is None


class TestGram:

    def test_orthogonal_rows(self):
        d = PartiallyLabeledDataset(features=[[1.0, 1.0], [1.0, -1.0]], labels=[0.0, 0.0])
        np.testing.assert_allclose(gram(d, Scope.LABELED).matrix, np.eye(2))

    def test_rank_one(self):
        d = PartiallyLabeledDataset(features=[[2.0, 0.0]], labels=[1.0])
        np.testing.assert_allclose(gram(d, 'labeled').matrix, [[4.0, 0.0], [0.0, 0.0]])

    def test_mixture_identity(self, random_dataset):
        d = random_dataset
        lab = gram(d, Scope.LABELED).matrix
        unlab = gram(d, Scope.UNLABELED).matrix
        full = gram(d, Scope.ALL).matrix
        np.testing.assert_allclose(d.N * full, d.n * lab + d.m * unlab, rtol=1e-12, atol=1e-14)
        assert np.linalg.eigvalsh(d.N * full - d.n * lab)[0] >= -1e-10 * np.linalg.norm(full, 2)

    def test_row_permutation(self, random_dataset, rng):
        d = random_dataset
        order = np.concatenate([rng.permutation(d.n), d.n + rng.permutation(d.m)])
        shuffled = PartiallyLabeledDataset(features=d.features[order], labels=d.labels[order[:d.n]])
        for scope in (Scope.LABELED, Scope.UNLABELED, Scope.ALL):
            np.testing.assert_allclose(gram(shuffled, scope).matrix, gram(d, scope).matrix, atol=1e-14)

    def test_empty_unlabeled_scope(self):
        d = PartiallyLabeledDataset(features=[[1.0]], labels=[1.0])
        with pytest.raises(ScopeError):
            gram(d, Scope.UNLABELED)

    def test_population_is_not_empirical(self, random_dataset):
        with pytest.raises(ScopeError):
            gram(random_dataset, Scope.POPULATION)


class TestLabeledMoment:

    def test_unit_rows(self):
        d = PartiallyLabeledDataset(features=[[1.0, 0.0], [0.0, 1.0]], labels=[2.0, 0.0])
        np.testing.assert_allclose(labeled_moment(d), [1.0, 0.0])

    def test_zero_labels(self, rng):
        d = PartiallyLabeledDataset(features=rng.normal(size=(4, 3)), labels=np.zeros(4))
        np.testing.assert_array_equal(labeled_moment(d), np.zeros(3))

    def test_matches_summation(self, rng):
        X, y = rng.normal(size=(5, 3)), rng.normal(size=5)
        d = PartiallyLabeledDataset(features=X, labels=y)
        expected = [sum(y[i] * X[i, j] for i in range(5)) / 5 for j in range(3)]
        np.testing.assert_allclose(labeled_moment(d), expected, rtol=1e-12)


def test_infer_bounds_flags_dataset(random_dataset):
    d = infer_bounds(random_dataset)
    assert d.bounds_inferred is True
    assert d.bounds.B_X == pytest.approx(np.max(np.abs(random_dataset.features)))
    assert d.bounds.B_Y == pytest.approx(np.max(np.abs(random_dataset.labels)))
    assert d.summary()['bounds_inferred'] is True
