import numpy as np
import pytest

from errors import ScopeError, DimensionMismatchError, NotSymmetricError
from models.dataset import PartiallyLabeledDataset, Scope
from models.estimator import EstimatorVariant
from services.dataset import gram, labeled_moment
from services.estimators import build_problem, pseudo_inverse, range_projector, fit
from services.solver import objective


@pytest.fixture
def supervised_only():
    return PartiallyLabeledDataset(features=[[1.0, 1.0], [1.0, -1.0]], labels=[1.0, 0.5])


class TestBuildProblem:

    def test_supervised_uses_labeled_gram(self, supervised_only):
        problem = build_problem(supervised_only, EstimatorVariant.SUPERVISED, 0.1)
        np.testing.assert_allclose(problem.G, np.eye(2))
        np.testing.assert_allclose(problem.b, labeled_moment(supervised_only))

    def test_supervised_least_squares_equivalence(self, rng):
        X, y = rng.normal(size=(5, 3)), rng.normal(size=5)
        d = PartiallyLabeledDataset(features=X, labels=y)
        lam = 0.2
        problem = build_problem(d, 'supervised', lam)
        for _ in range(5):
            beta = rng.normal(size=3)
            penalized = np.mean((y - X @ beta) ** 2) + 2 * lam * np.abs(beta).sum()
            assert penalized - objective(problem, beta) == pytest.approx(np.mean(y ** 2), rel=1e-10)

    @pytest.mark.parametrize('variant,scope', [
        (EstimatorVariant.TRANSDUCTIVE, Scope.UNLABELED),
        (EstimatorVariant.SEMISUPERVISED, Scope.ALL),
        (EstimatorVariant.TRANSDUCTIVE_PROJECTED, Scope.UNLABELED),
    ])
    def test_gram_scope(self, random_dataset, variant, scope):
        problem = build_problem(random_dataset, variant, 0.1)
        np.testing.assert_allclose(problem.G, gram(random_dataset, scope).matrix)

    def test_alquier_reduces_to_plain_moment(self, rng):
        X = rng.normal(size=(5, 3))
        d = PartiallyLabeledDataset(features=np.vstack([X, X]), labels=rng.normal(size=5))
        alquier = build_problem(d, EstimatorVariant.ALQUIER, 0.1)
        plain = build_problem(d, EstimatorVariant.TRANSDUCTIVE, 0.1)
        np.testing.assert_allclose(alquier.b, plain.b, atol=1e-10)

    def test_alquier_moment_in_unlabeled_range(self, rng):
        d = PartiallyLabeledDataset(features=rng.normal(size=(8, 5)), labels=rng.normal(size=6))
        problem = build_problem(d, EstimatorVariant.ALQUIER, 0.1)
        projector = range_projector(problem.G)
        np.testing.assert_allclose(projector @ problem.b, problem.b, atol=1e-10)

    def test_projection_is_noop_when_moment_in_range(self, random_dataset):
        plain = build_problem(random_dataset, EstimatorVariant.TRANSDUCTIVE, 0.1)
        projected = build_problem(random_dataset, EstimatorVariant.TRANSDUCTIVE_PROJECTED, 0.1)
        # 4 unlabeled rows in R^4 span the whole space
        np.testing.assert_allclose(projected.b, plain.b, atol=1e-10)

    @pytest.mark.parametrize('variant', [
        EstimatorVariant.TRANSDUCTIVE, EstimatorVariant.TRANSDUCTIVE_PROJECTED, EstimatorVariant.ALQUIER,
    ])
    def test_unlabeled_variants_need_unlabeled_rows(self, supervised_only, variant):
        with pytest.raises(ScopeError):
            build_problem(supervised_only, variant, 0.1)

    def test_semisupervised_on_fully_labeled_equals_supervised(self, supervised_only):
        semi = build_problem(supervised_only, EstimatorVariant.SEMISUPERVISED, 0.1)
        sup = build_problem(supervised_only, EstimatorVariant.SUPERVISED, 0.1)
        np.testing.assert_allclose(semi.G, sup.G)

    def test_known_sigma(self, supervised_only):
        problem = build_problem(supervised_only, EstimatorVariant.KNOWN_SIGMA, 0.1, sigma=np.eye(2))
        np.testing.assert_allclose(problem.G, np.eye(2))

    def test_known_sigma_dimension(self, supervised_only):
        with pytest.raises(DimensionMismatchError):
            build_problem(supervised_only, EstimatorVariant.KNOWN_SIGMA, 0.1, sigma=np.eye(3))
        with pytest.raises(DimensionMismatchError):
            build_problem(supervised_only, EstimatorVariant.KNOWN_SIGMA, 0.1)


class TestSpectral:

    def test_pseudo_inverse_diagonal(self):
        np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_pseudo_inverse_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))

    def test_penrose_identities(self, random_psd):
        M = random_psd(4, rank=2)
        P = pseudo_inverse(M)
        scale = np.linalg.norm(M)
        np.testing.assert_allclose(M @ P @ M, M, atol=1e-8 * scale)
        np.testing.assert_allclose(P @ M @ P, P, atol=1e-8 * np.linalg.norm(P))
        np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-8)
        np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-8)

    def test_projector_diagonal(self):
        np.testing.assert_allclose(range_projector(np.diag([2.0, 0.0])), np.diag([1.0, 0.0]))

    def test_projector_full_rank(self, random_psd):
        np.testing.assert_allclose(range_projector(random_psd(4)), np.eye(4), atol=1e-8)

    def test_projector_rank_of_sample(self, rng):
        U = rng.normal(size=(3, 5))
        M = U.T @ U / 3
        projector = range_projector(M)
        assert np.trace(projector) == pytest.approx(3.0, abs=1e-8)
        np.testing.assert_allclose(projector @ projector, projector, atol=1e-8)
        np.testing.assert_allclose(projector @ M, M, atol=1e-8)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            pseudo_inverse([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(NotSymmetricError):
            range_projector([[1.0, 2.0, 3.0]])


def test_fit_records_rank_tol(random_dataset):
    result = fit(random_dataset, EstimatorVariant.TRANSDUCTIVE_PROJECTED, 0.05, rank_tol=1e-9)
    assert result.solution.converged
    assert result.to_dict()['rank_tol'] == 1e-9
    assert 'rank_tol' not in fit(random_dataset, EstimatorVariant.SEMISUPERVISED, 0.05).to_dict()
