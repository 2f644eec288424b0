import numpy as np
import pytest

from errors import UnboundedProblemError, DimensionMismatchError, NotSymmetricError
from models.problem import PenalizedQuadraticProblem
from services.solver import solve, kkt_residual, objective, fixed_point_gap, proximal_gradient, soft_threshold


@pytest.fixture
def scalar_problem():
    return PenalizedQuadraticProblem(G=[[1.0]], b=[2.0], lam=0.5)


@pytest.fixture
def random_problem(rng, random_psd):
    return PenalizedQuadraticProblem(G=random_psd(6), b=rng.normal(size=6), lam=0.1)


class TestSolve:

    def test_soft_threshold_closed_form(self, scalar_problem):
        solution = solve(scalar_problem)
        assert solution.converged
        np.testing.assert_allclose(solution.beta_hat, [1.5])
        assert solution.objective == pytest.approx(-2.25)

    def test_separable_diagonal(self):
        solution = solve(PenalizedQuadraticProblem(G=np.diag([1.0, 2.0]), b=[1.0, 0.2], lam=0.5))
        np.testing.assert_allclose(solution.beta_hat, [0.5, 0.0])

    def test_diagonal_matches_soft_threshold(self, rng):
        diag = rng.uniform(0.5, 2.0, size=5)
        b = rng.normal(size=5)
        solution = solve(PenalizedQuadraticProblem(G=np.diag(diag), b=b, lam=0.3))
        np.testing.assert_allclose(solution.beta_hat, soft_threshold(b, 0.3) / diag, atol=1e-12)

    def test_matches_proximal_gradient(self, rng, random_psd):
        problem = PenalizedQuadraticProblem(G=random_psd(2), b=rng.normal(size=2), lam=0.2)
        ours = solve(problem, tol=1e-10)
        oracle = proximal_gradient(problem, tol=1e-10)
        assert ours.converged and oracle.converged
        assert ours.objective == pytest.approx(oracle.objective, abs=1e-8)

    def test_kkt_certificate_and_trace(self, random_problem):
        solution = solve(random_problem, tol=1e-9)
        assert solution.kkt_residual <= 1e-9
        assert kkt_residual(random_problem, solution.beta_hat) <= 1e-9
        assert solution.objective <= objective(random_problem, np.zeros(6))
        trace = np.array(solution.trace)
        assert np.all(np.diff(trace) <= 1e-10 * (1 + np.abs(trace[:-1])))

    def test_fixed_point_gap_over_probes(self, random_problem, rng):
        solution = solve(random_problem, tol=1e-10)
        gaps = [fixed_point_gap(random_problem, solution.beta_hat, rng.normal(size=6)) for _ in range(100)]
        assert min(gaps) >= -1e-8

    def test_scale_invariance(self, random_problem):
        base = solve(random_problem, tol=1e-10)
        scaled = solve(random_problem.scaled(3.0), tol=1e-10)
        assert scaled.objective == pytest.approx(3.0 * base.objective, rel=1e-8)

    def test_zero_diagonal_pinned(self):
        problem = PenalizedQuadraticProblem(G=np.diag([1.0, 0.0]), b=[1.0, 0.3], lam=0.5)
        solution = solve(problem)
        np.testing.assert_allclose(solution.beta_hat, [0.5, 0.0])

    def test_unbounded(self):
        problem = PenalizedQuadraticProblem(G=np.diag([1.0, 0.0]), b=[1.0, 0.8], lam=0.5)
        with pytest.raises(UnboundedProblemError) as excinfo:
            solve(problem)
        assert excinfo.value.coordinate == 1

    def test_max_sweeps_reports_not_converged(self, random_problem):
        solution = solve(random_problem, tol=1e-14, max_sweeps=1)
        assert solution.sweeps == 1
        assert not solution.converged or solution.kkt_residual <= 1e-14

    def test_zero_sweeps_when_zero_is_optimal(self):
        solution = solve(PenalizedQuadraticProblem(G=np.eye(2), b=[0.1, -0.2], lam=0.5))
        assert solution.sweeps == 0
        np.testing.assert_array_equal(solution.beta_hat, [0.0, 0.0])


def _regression_problem(rng, p):
    """G = X'X/m and b = X'y/m, so b lies in range(G) even when m < p"""
    m = int(rng.integers(1, 2 * p + 1))
    X = rng.normal(size=(m, p))
    y = rng.normal(size=m)
    return PenalizedQuadraticProblem(G=X.T @ X / m, b=X.T @ y / m, lam=float(rng.uniform(0.01, 1.0)))


@pytest.mark.slow
class TestRandomProblems:

    def test_matches_proximal_gradient_on_500_problems(self):
        rng = np.random.default_rng(2024)
        for index in range(500):
            problem = _regression_problem(rng, int(rng.integers(1, 51)))
            ours = solve(problem, tol=1e-10)
            oracle = proximal_gradient(problem, tol=1e-10)
            assert ours.converged, index
            scale = max(1.0, abs(oracle.objective))
            assert abs(ours.objective - oracle.objective) <= 1e-8 * scale, index

    def test_fixed_point_gap_on_10000_pairs(self):
        rng = np.random.default_rng(77)
        for index in range(100):
            p = int(rng.integers(1, 51))
            problem = _regression_problem(rng, p)
            solution = solve(problem, tol=1e-10)
            assert solution.converged, index
            for _ in range(100):
                probe = rng.normal(size=p) * rng.choice([0.1, 1.0, 10.0])
                scale = max(1.0, probe @ problem.G @ probe, np.abs(probe).sum())
                assert fixed_point_gap(problem, solution.beta_hat, probe) >= -1e-8 * scale, index


class TestCertificates:

    def test_kkt_at_optimum(self, scalar_problem):
        assert kkt_residual(scalar_problem, [1.5]) == 0.0

    def test_kkt_at_zero(self):
        problem = PenalizedQuadraticProblem(G=np.eye(3), b=[1.0, -0.2, 0.7], lam=0.5)
        assert kkt_residual(problem, np.zeros(3)) == pytest.approx(0.5)

    def test_objective(self, scalar_problem):
        assert objective(scalar_problem, [0.0]) == 0.0
        assert objective(scalar_problem, [1.5]) == pytest.approx(-2.25)

    def test_objective_homogeneity(self, random_problem, rng):
        beta = rng.normal(size=6)
        assert objective(random_problem.scaled(3.0), beta) == pytest.approx(3.0 * objective(random_problem, beta))

    def test_gap_probe_equals_solution(self, random_problem, rng):
        beta = rng.normal(size=6)
        assert fixed_point_gap(random_problem, beta, beta) == pytest.approx(0.0, abs=1e-12)

    def test_gap_scalar_probe_zero(self, scalar_problem):
        # the inequality is tight for a one-dimensional quadratic
        assert fixed_point_gap(scalar_problem, [1.5], [0.0]) == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self, scalar_problem):
        with pytest.raises(DimensionMismatchError):
            objective(scalar_problem, [1.0, 2.0])


class TestProblem:

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            PenalizedQuadraticProblem(G=[[1.0]], b=[1.0], lam=0.0)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            PenalizedQuadraticProblem(G=[[1.0, 0.5], [0.0, 1.0]], b=[1.0, 1.0], lam=0.1)

    def test_rejects_indefinite(self):
        with pytest.raises(NotSymmetricError):
            PenalizedQuadraticProblem(G=[[1.0, 2.0], [2.0, 1.0]], b=[1.0, 1.0], lam=0.1)
