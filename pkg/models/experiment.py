"""
Monte Carlo experiment configuration
"""

from dataclasses import dataclass, asdict
from enum import Enum
from typing import Optional, Tuple

from errors import ExperimentConfigError
from models.estimator import EstimatorVariant
from models.model_spec import NonlinearityKind


class Theorem(str, Enum):
    """Risk bound a campaign checks"""
    T1 = "T1"      # transductive oracle inequality
    T2_A = "T2_a"  # well-specified, sample compatibility / RE bound
    T2_B = "T2_b"  # well-specified, population weak compatibility bound
    T3 = "T3"      # mis-specified, fixed support
    COR1 = "Cor1"  # mis-specified, inverse-covariance form
    T4 = "T4"      # bound in expectation

    @property
    def allowed_variants(self) -> Tuple[EstimatorVariant, ...]:
        if self is Theorem.T1:
            return (EstimatorVariant.TRANSDUCTIVE, EstimatorVariant.TRANSDUCTIVE_PROJECTED)
        return (EstimatorVariant.SEMISUPERVISED,)

    @property
    def needs_well_specified(self) -> bool:
        return self in (Theorem.T2_A, Theorem.T2_B)


DESIGNS = ('identity', 'equicorrelated', 'chain')


@dataclass(frozen=True)
class ExperimentConfig:
    """One desk-scale coverage experiment; see configs/*.cfg for examples"""

    theorem: Theorem
    p: int
    n: int
    N: int
    s_star: int
    beta_magnitude: float = 1.0
    design: str = 'identity'
    nonlinearity: NonlinearityKind = NonlinearityKind.NONE
    alpha: float = 0.0
    noise_halfwidth: float = 0.5
    delta: float = 0.1
    gamma: float = 2.0
    lambda_slack: float = 1.0
    trials: int = 200
    master_seed: int = 0
    variant: Optional[EstimatorVariant] = None
    risk_mc_points: int = 0
    probes: int = 10

    def __post_init__(self):
        try:
            object.__setattr__(self, 'theorem', Theorem(self.theorem))
        except ValueError:
            raise ExperimentConfigError(
                f"Unknown theorem '{self.theorem}', expected one of {[t.value for t in Theorem]}", 'theorem')
        try:
            object.__setattr__(self, 'nonlinearity', NonlinearityKind(self.nonlinearity))
        except ValueError:
            raise ExperimentConfigError(f"Unknown nonlinearity '{self.nonlinearity}'", 'nonlinearity')
        if self.variant is not None:
            try:
                object.__setattr__(self, 'variant', EstimatorVariant(self.variant))
            except ValueError:
                raise ExperimentConfigError(f"Unknown variant '{self.variant}'", 'variant')
        self.validate()

    def validate(self):
        checks = [
            ('p', self.p >= 1, 'must be >= 1'),
            ('n', self.n >= 1, 'must be >= 1'),
            ('N', self.N >= self.n, 'must be >= n'),
            ('s_star', 0 <= self.s_star <= self.p, 'must be in [0, p]'),
            ('beta_magnitude', self.beta_magnitude > 0, 'must be > 0'),
            ('design', self.design in DESIGNS, f'must be one of {list(DESIGNS)}'),
            ('noise_halfwidth', self.noise_halfwidth >= 0, 'must be >= 0'),
            ('delta', 0 < self.delta < 1, 'must be in (0, 1)'),
            ('gamma', self.gamma > 1, 'must be > 1'),
            ('lambda_slack', self.lambda_slack >= 1, 'must be >= 1 (smaller values void the bound)'),
            ('trials', self.trials >= 1, 'must be >= 1'),
            ('master_seed', self.master_seed >= 0, 'must be >= 0'),
            ('risk_mc_points', self.risk_mc_points >= 0, 'must be >= 0'),
            ('probes', self.probes >= 0, 'must be >= 0'),
        ]
        for key, ok, message in checks:
            if not ok:
                raise ExperimentConfigError(f"Invalid value for '{key}': {message}", key)
        if self.nonlinearity is NonlinearityKind.BOUNDED_INTERACTION and self.p < 2:
            raise ExperimentConfigError("bounded_interaction needs p >= 2", 'nonlinearity')
        if self.theorem.needs_well_specified and self.nonlinearity is not NonlinearityKind.NONE and self.alpha != 0:
            raise ExperimentConfigError(f"{self.theorem.value} needs a well-specified model", 'nonlinearity')
        if self.theorem is Theorem.T1 and self.N == self.n:
            raise ExperimentConfigError("T1 needs unlabeled rows (N > n)", 'N')
        if self.variant is not None and self.variant not in self.theorem.allowed_variants:
            raise ExperimentConfigError(
                f"variant '{self.variant.value}' is not covered by {self.theorem.value}", 'variant')

    @property
    def estimator_variant(self) -> EstimatorVariant:
        return self.variant or self.theorem.allowed_variants[0]

    def to_dict(self):
        payload = asdict(self)
        payload['theorem'] = self.theorem.value
        payload['nonlinearity'] = self.nonlinearity.value
        payload['variant'] = self.estimator_variant.value
        return payload
