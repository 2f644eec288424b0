"""
Penalized quadratic minimization

F(beta) = beta' G beta - 2 b' beta + 2 lam ||beta||_1, G symmetric PSD.
Cyclic coordinate descent is the production solver; proximal gradient
(ISTA/FISTA) is kept as an independent oracle.
"""

import logging
from typing import Optional

import numpy as np

from config import Config
from errors import UnboundedProblemError, DimensionMismatchError
from models.problem import PenalizedQuadraticProblem, Solution

logger = logging.getLogger(__name__)

# Diagonal entries at or below this fraction of the largest one are treated as zero
ZERO_DIAGONAL_RTOL = 1e-14


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0), elementwise"""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _as_beta(problem: PenalizedQuadraticProblem, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != problem.p:
        raise DimensionMismatchError(f"beta has length {beta.shape[0]}, problem has p={problem.p}")
    return beta


def _kkt_from_gradient(g: np.ndarray, beta: np.ndarray, lam: float) -> float:
    if g.size == 0:
        return 0.0
    nonzero = beta != 0
    violations = np.where(
        nonzero,
        np.abs(g + lam * np.sign(beta)),
        np.maximum(np.abs(g) - lam, 0.0),
    )
    return float(np.max(violations))


def kkt_residual(problem: PenalizedQuadraticProblem, beta) -> float:
    """Largest violation of the subgradient optimality conditions (0 iff optimal)"""
    beta = _as_beta(problem, beta)
    return _kkt_from_gradient(problem.G @ beta - problem.b, beta, problem.lam)


def objective(problem: PenalizedQuadraticProblem, beta) -> float:
    """F(beta); F(0) = 0"""
    beta = _as_beta(problem, beta)
    return float(beta @ problem.G @ beta - 2.0 * problem.b @ beta + 2.0 * problem.lam * np.abs(beta).sum())


def fixed_point_gap(problem: PenalizedQuadraticProblem, beta_hat, beta_probe) -> float:
    """
    RHS - LHS of the fixed-point inequality for the lasso minimizer:

        beta_hat' G beta_hat <= beta' G beta + 2 b'(beta_hat - beta) + 2 lam ||beta||_1
                                - 2 lam ||beta_hat||_1 - (beta_hat - beta)' G (beta_hat - beta)

    Nonnegative for every probe when beta_hat minimizes F.
    """
    beta_hat = _as_beta(problem, beta_hat)
    beta = _as_beta(problem, beta_probe)
    G, b, lam = problem.G, problem.b, problem.lam
    diff = beta_hat - beta
    rhs = (
        beta @ G @ beta
        + 2.0 * b @ diff
        + 2.0 * lam * np.abs(beta).sum()
        - 2.0 * lam * np.abs(beta_hat).sum()
        - diff @ G @ diff
    )
    return float(rhs - beta_hat @ G @ beta_hat)


def _pinned_coordinates(problem: PenalizedQuadraticProblem) -> np.ndarray:
    """Coordinates with G_jj = 0; raises when the objective is unbounded along one"""
    diag = np.diag(problem.G)
    top = float(np.max(diag)) if diag.size else 0.0
    pinned = diag <= ZERO_DIAGONAL_RTOL * top if top > 0 else np.ones_like(diag, dtype=bool)
    for j in np.flatnonzero(pinned):
        if abs(problem.b[j]) > problem.lam:
            raise UnboundedProblemError(int(j), float(problem.b[j]), problem.lam)
    return pinned


def solve(
    problem: PenalizedQuadraticProblem,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
) -> Solution:
    """
    Cyclic coordinate descent from beta = 0.

    Each coordinate is set to its exact minimizer (soft-thresholding); the
    run stops once the KKT residual is at most `tol`. Hitting `max_sweeps`
    returns converged=False instead of raising.
    """
    tol = Config.SOLVER_TOL if tol is None else tol
    max_sweeps = Config.SOLVER_MAX_SWEEPS if max_sweeps is None else max_sweeps

    G, b, lam = problem.G, problem.b, problem.lam
    p = problem.p
    pinned = _pinned_coordinates(problem)
    free = [int(j) for j in np.flatnonzero(~pinned)]
    diag = [float(G[j, j]) for j in range(p)]
    b_list = [float(v) for v in b]

    beta = np.zeros(p)
    Gbeta = np.zeros(p)
    residual = _kkt_from_gradient(-b, beta, lam)
    trace = []
    sweeps = 0

    while residual > tol and sweeps < max_sweeps:
        sweeps += 1
        for j in free:
            old = beta[j]
            # partial residual excluding coordinate j
            r = b_list[j] - (Gbeta[j] - diag[j] * old)
            if r > lam:
                new = (r - lam) / diag[j]
            elif r < -lam:
                new = (r + lam) / diag[j]
            else:
                new = 0.0
            if new != old:
                Gbeta += G[j] * (new - old)
                beta[j] = new
        # refresh to keep rounding from accumulating
        Gbeta = G @ beta
        residual = _kkt_from_gradient(Gbeta - b, beta, lam)
        trace.append(objective(problem, beta))

    converged = residual <= tol
    if not converged:
        logger.warning(f"Coordinate descent stopped after {sweeps} sweeps with KKT residual {residual:.3e} > {tol:.1e}")
    return Solution(
        beta_hat=beta,
        kkt_residual=residual,
        objective=objective(problem, beta),
        sweeps=sweeps,
        converged=converged,
        trace=tuple(trace),
    )


def proximal_gradient(
    problem: PenalizedQuadraticProblem,
    tol: float = 1e-10,
    max_iter: int = 200000,
    accelerated: bool = True,
) -> Solution:
    """
    ISTA / FISTA with function-value restart, step 1/L with L = 2 lambda_max(G).

    Used as an independent reference for the coordinate-descent solver.
    """
    G, b, lam = problem.G, problem.b, problem.lam
    _pinned_coordinates(problem)
    L = 2.0 * float(np.linalg.eigvalsh(G)[-1]) if problem.p else 0.0
    beta = np.zeros(problem.p)
    if L <= 0:
        return Solution(beta, kkt_residual(problem, beta), 0.0, 0, kkt_residual(problem, beta) <= tol)

    step = 1.0 / L
    y = beta.copy()
    t = 1.0
    value = objective(problem, beta)
    residual = kkt_residual(problem, beta)
    iterations = 0
    while residual > tol and iterations < max_iter:
        iterations += 1
        candidate = soft_threshold(y - step * 2.0 * (G @ y - b), 2.0 * lam * step)
        candidate_value = objective(problem, candidate)
        if accelerated and t > 1.0 and candidate_value > value:
            # restart momentum
            y = beta.copy()
            t = 1.0
            continue
        if accelerated:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = candidate + ((t - 1.0) / t_next) * (candidate - beta)
            t = t_next
        else:
            y = candidate
        beta, value = candidate, candidate_value
        residual = kkt_residual(problem, beta)

    return Solution(
        beta_hat=beta,
        kkt_residual=residual,
        objective=value,
        sweeps=iterations,
        converged=residual <= tol,
    )
