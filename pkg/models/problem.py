"""
Penalized quadratic problem and solver output
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from errors import DimensionMismatchError
from utils.linalg import symmetric_psd, freeze


@dataclass(frozen=True, eq=False)
class PenalizedQuadraticProblem:
    """F(beta) = beta' G beta - 2 b' beta + 2 lam ||beta||_1 with G symmetric PSD"""

    G: np.ndarray
    b: np.ndarray
    lam: float

    def __post_init__(self):
        G = symmetric_psd(self.G, 'G')
        b = np.array(self.b, dtype=float).reshape(-1)
        if b.shape[0] != G.shape[0]:
            raise DimensionMismatchError(f"b has length {b.shape[0]} but G is {G.shape[0]} x {G.shape[0]}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be a positive real, got {self.lam}")
        object.__setattr__(self, 'G', freeze(G))
        object.__setattr__(self, 'b', freeze(b))
        object.__setattr__(self, 'lam', float(self.lam))

    @property
    def p(self) -> int:
        return self.b.shape[0]

    def scaled(self, t: float) -> "PenalizedQuadraticProblem":
        """(tG, tb, t lam), same minimizers"""
        return PenalizedQuadraticProblem(t * self.G, t * self.b, t * self.lam)


@dataclass(frozen=True, eq=False)
class Solution:
    """Minimizer plus convergence diagnostics"""

    beta_hat: np.ndarray
    kkt_residual: float
    objective: float
    sweeps: int
    converged: bool
    trace: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'beta_hat', freeze(np.array(self.beta_hat, dtype=float)))

    def to_dict(self):
        return {
            'beta_hat': [float(v) for v in self.beta_hat],
            'kkt_residual': float(self.kkt_residual),
            'objective': float(self.objective),
            'sweeps': int(self.sweeps),
            'converged': bool(self.converged),
        }
