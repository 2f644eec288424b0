"""
Estimator variants of the generalized lasso
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from models.dataset import Scope
from models.problem import PenalizedQuadraticProblem, Solution


class EstimatorVariant(str, Enum):
    """Which second-moment matrix (and which linear term) the lasso uses"""
    SUPERVISED = "supervised"                          # G = labeled Gram
    TRANSDUCTIVE = "transductive"                      # G = unlabeled Gram
    TRANSDUCTIVE_PROJECTED = "transductive_projected"  # unlabeled Gram, b projected on its range
    SEMISUPERVISED = "semisupervised"                  # G = Gram over all rows
    KNOWN_SIGMA = "known_sigma"                        # G = population covariance
    ALQUIER = "alquier"                                # unlabeled Gram, b mapped through labeled pseudo-inverse

    @property
    def gram_scope(self) -> Scope:
        return _GRAM_SCOPE[self]

    @property
    def needs_unlabeled(self) -> bool:
        return self in (
            EstimatorVariant.TRANSDUCTIVE,
            EstimatorVariant.TRANSDUCTIVE_PROJECTED,
            EstimatorVariant.ALQUIER,
        )


_GRAM_SCOPE = {
    EstimatorVariant.SUPERVISED: Scope.LABELED,
    EstimatorVariant.TRANSDUCTIVE: Scope.UNLABELED,
    EstimatorVariant.TRANSDUCTIVE_PROJECTED: Scope.UNLABELED,
    EstimatorVariant.SEMISUPERVISED: Scope.ALL,
    EstimatorVariant.KNOWN_SIGMA: Scope.POPULATION,
    EstimatorVariant.ALQUIER: Scope.UNLABELED,
}


@dataclass(frozen=True, eq=False)
class FitResult:
    """A solved estimator together with the problem it came from"""

    variant: EstimatorVariant
    problem: PenalizedQuadraticProblem
    solution: Solution
    rank_tol: Optional[float] = None

    def to_dict(self):
        payload = {
            'variant': self.variant.value,
            'lambda': self.problem.lam,
        }
        payload.update(self.solution.to_dict())
        if self.rank_tol is not None:
            payload['rank_tol'] = self.rank_tol
        return payload
