"""
Problem assembly for every estimator variant, plus the spectral helpers they need
"""

import logging
from typing import Optional, Union

import numpy as np

from config import Config
from errors import ScopeError, DimensionMismatchError, NotSymmetricError
from models.dataset import PartiallyLabeledDataset, GramMatrix, Scope
from models.estimator import EstimatorVariant, FitResult
from models.problem import PenalizedQuadraticProblem
from services.dataset import gram, labeled_moment
from services.solver import solve
from utils.linalg import as_square, check_symmetric, symmetric_psd

logger = logging.getLogger(__name__)


def _spectrum(M, rank_tol: float):
    try:
        S = check_symmetric(as_square(M, 'M'), 'M')
    except DimensionMismatchError as e:
        raise NotSymmetricError(str(e)) from e
    eigenvalues, eigenvectors = np.linalg.eigh(S)
    top = float(eigenvalues[-1]) if eigenvalues.size else 0.0
    keep = eigenvalues > rank_tol * top if top > 0 else np.zeros_like(eigenvalues, dtype=bool)
    return eigenvalues, eigenvectors, keep


def pseudo_inverse(M, rank_tol: Optional[float] = None) -> np.ndarray:
    """Spectral Moore-Penrose inverse, eigenvalues below rank_tol * lambda_max zeroed"""
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    eigenvalues, V, keep = _spectrum(M, rank_tol)
    Vk = V[:, keep]
    P = (Vk / eigenvalues[keep]) @ Vk.T
    return (P + P.T) / 2.0


def range_projector(M, rank_tol: Optional[float] = None) -> np.ndarray:
    """Orthogonal projector onto range(M)"""
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    _, V, keep = _spectrum(M, rank_tol)
    Vk = V[:, keep]
    P = Vk @ Vk.T
    return (P + P.T) / 2.0


def build_problem(
    d: PartiallyLabeledDataset,
    v: EstimatorVariant,
    lam: float,
    sigma: Optional[Union[GramMatrix, np.ndarray]] = None,
    rank_tol: Optional[float] = None,
) -> PenalizedQuadraticProblem:
    """
    Assemble (G, b, lam) for variant `v`.

    Args:
        d: dataset
        v: estimator variant
        lam: penalty level (> 0)
        sigma: population covariance, required by KNOWN_SIGMA only
        rank_tol: spectral cutoff for ALQUIER and TRANSDUCTIVE_PROJECTED

    Returns:
        PenalizedQuadraticProblem
    """
    v = EstimatorVariant(v)
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    if v.needs_unlabeled and d.m == 0:
        raise ScopeError(f"Variant '{v.value}' needs unlabeled rows, dataset has N = n = {d.n}")

    b = labeled_moment(d)

    if v is EstimatorVariant.KNOWN_SIGMA:
        if sigma is None:
            raise DimensionMismatchError("Variant 'known_sigma' needs the population covariance")
        G = sigma.matrix if isinstance(sigma, GramMatrix) else symmetric_psd(sigma, 'Sigma')
        if G.shape != (d.p, d.p):
            raise DimensionMismatchError(f"Sigma is {G.shape[0]} x {G.shape[1]}, dataset has p={d.p}")
        return PenalizedQuadraticProblem(G, b, lam)

    G = gram(d, v.gram_scope).matrix
    if v is EstimatorVariant.TRANSDUCTIVE_PROJECTED:
        b = range_projector(G, rank_tol) @ b
    elif v is EstimatorVariant.ALQUIER:
        b = G @ (pseudo_inverse(gram(d, Scope.LABELED).matrix, rank_tol) @ b)
    return PenalizedQuadraticProblem(G, b, lam)


def fit(
    d: PartiallyLabeledDataset,
    v: EstimatorVariant,
    lam: float,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
    sigma: Optional[Union[GramMatrix, np.ndarray]] = None,
    rank_tol: Optional[float] = None,
) -> FitResult:
    """Build and solve in one step"""
    v = EstimatorVariant(v)
    problem = build_problem(d, v, lam, sigma=sigma, rank_tol=rank_tol)
    solution = solve(problem, tol=tol, max_sweeps=max_sweeps)
    logger.debug(f"{v.value}: lambda={lam:.6g}, sweeps={solution.sweeps}, kkt={solution.kkt_residual:.3e}")
    uses_rank_tol = v in (EstimatorVariant.TRANSDUCTIVE_PROJECTED, EstimatorVariant.ALQUIER)
    return FitResult(
        variant=v, problem=problem, solution=solution,
        rank_tol=(Config.RANK_TOL if rank_tol is None else rank_tol) if uses_rank_tol else None,
    )
