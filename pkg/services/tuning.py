"""
Closed-form tuning parameters and concentration quantiles

Every lambda returned here is the smallest value the corresponding risk
bound allows; callers may multiply it by a slack factor >= 1. Natural
logarithms throughout.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import ScopeError, ConditionViolationError
from services.geometry import compatibility


class NoiseKind(str, Enum):
    """Which empirical-process vector the quantile controls"""
    ZETA1 = "zeta1"        # labeled average against the population mean
    ZETA = "zeta"          # labeled average against the unlabeled average
    ZETA_BAR = "zeta_bar"  # labeled average against the average over all rows


@dataclass(frozen=True)
class BoundInputs:
    """
    Inputs shared by the tuning formulas.

    `label_rms` is L_Y = E[Y^2]^(1/2); with `variance_refinement` on, the
    variance term of the noise quantiles uses L_Y B_X instead of B_Y.
    """
    B_X: float
    B_Y: float
    n: int
    N: int
    p: int
    delta: float
    sigma_inv_norm: float = 1.0
    gamma: float = 2.0
    label_rms: Optional[float] = None
    variance_refinement: bool = False

    def __post_init__(self):
        if self.B_X < 0 or self.B_Y < 0:
            raise ValueError("B_X and B_Y must be nonnegative")
        if self.n < 1 or self.N < self.n or self.p < 1:
            raise ValueError(f"need 1 <= n <= N and p >= 1, got n={self.n}, N={self.N}, p={self.p}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if self.sigma_inv_norm < 0:
            raise ValueError("sigma_inv_norm must be nonnegative")
        if self.variance_refinement and self.label_rms is None:
            raise ValueError("variance_refinement needs label_rms")

    @property
    def m(self) -> int:
        return self.N - self.n

    @property
    def n_star(self) -> int:
        if self.m < 1:
            raise ScopeError("n_star needs unlabeled rows (N > n)")
        return min(self.n, self.m)

    @property
    def c_gamma(self) -> float:
        return (self.gamma + 1.0) / (self.gamma - 1.0)

    @property
    def variance_scale(self) -> float:
        """B_Y, or L_Y B_X under the variance refinement"""
        if self.variance_refinement:
            return self.label_rms * self.B_X
        return self.B_Y

    def to_dict(self):
        payload = {
            'B_X': self.B_X, 'B_Y': self.B_Y, 'n': self.n, 'N': self.N, 'm': self.m, 'p': self.p,
            'delta': self.delta, 'sigma_inv_norm': self.sigma_inv_norm, 'gamma': self.gamma,
        }
        if self.m >= 1:
            payload['n_star'] = self.n_star
        if self.variance_refinement:
            payload['label_rms'] = self.label_rms
        return payload


def _bracket(leading: float, B_Y: float, B_X: float, coefficient: float, s: float) -> float:
    """leading * s + B_Y * (B_X / coefficient) * s^2, i.e. B_Y s [1 + (B_X/coefficient) s] at leading = B_Y"""
    return leading * s + B_Y * (B_X / coefficient) * s * s


def bernstein_quantile(sigma_N: float, b: float, N: int, delta: float) -> float:
    """
    Deviation level of a mean of N independent bounded variables:
    sigma_N sqrt(2 log(2/delta)/N) [1 + (b/(6 N sigma_N)) sqrt(2 log(2/delta)/N)].
    """
    if N < 1 or not 0 < delta < 1:
        raise ValueError("need N >= 1 and delta in (0, 1)")
    if sigma_N == 0:
        return 0.0
    s = math.sqrt(2.0 * math.log(2.0 / delta) / N)
    return sigma_N * s * (1.0 + b / (6.0 * N * sigma_N) * s)


def noise_quantile(kind: NoiseKind, inputs: BoundInputs) -> float:
    """Sup-norm quantile of the empirical-process vector `kind` at level delta"""
    kind = NoiseKind(kind)
    L = math.log(2.0 * inputs.p / inputs.delta)
    count = inputs.n_star if kind is NoiseKind.ZETA else inputs.n
    s = math.sqrt(L / count)
    coefficient = 2.0 if kind is NoiseKind.ZETA_BAR else 3.0
    return 2.0 * _bracket(inputs.variance_scale, inputs.B_Y, inputs.B_X, coefficient, s)


def zeta2_quantile(inputs: BoundInputs) -> float:
    """Sup-norm quantile of (Sigma - Sigma_hat_N) beta for ||Sigma^(1/2) beta|| <= B_Y"""
    L = math.log(6.0 * inputs.p / inputs.delta)
    s = math.sqrt(2.0 * L / inputs.N)
    t = math.sqrt(2.0 * inputs.p * inputs.sigma_inv_norm * L / inputs.N)
    return inputs.B_X * inputs.B_Y * s * (1.0 + inputs.B_X / 3.0 * t)


def lambda_transductive(inputs: BoundInputs) -> float:
    """2 gamma B_Y sqrt(log(2p/delta)/n_star) [1 + (B_X/3) sqrt(log(2p/delta)/n_star)]"""
    s = math.sqrt(math.log(2.0 * inputs.p / inputs.delta) / inputs.n_star)
    return 2.0 * inputs.gamma * _bracket(inputs.variance_scale, inputs.B_Y, inputs.B_X, 3.0, s)


def lambda_semisup_wellspec(inputs: BoundInputs) -> float:
    """4 B_Y sqrt(log(4p/delta)/n) [1 + (B_X/2) sqrt(log(4p/delta)/n)]"""
    s = math.sqrt(math.log(4.0 * inputs.p / inputs.delta) / inputs.n)
    return 4.0 * _bracket(inputs.variance_scale, inputs.B_Y, inputs.B_X, 2.0, s)


def lambda_semisup_misspec(inputs: BoundInputs) -> float:
    """8 B_X B_Y sqrt(log(6p/delta)/n) [1 + (B_X/3) sqrt(log(6p/delta)/n)]"""
    s = math.sqrt(math.log(6.0 * inputs.p / inputs.delta) / inputs.n)
    return 8.0 * inputs.B_X * inputs.B_Y * s * (1.0 + inputs.B_X / 3.0 * s)


def misspec_lambda_requirements(inputs: BoundInputs) -> Tuple[float, float]:
    """
    The two lower bounds on lambda the mis-specified argument needs:
    twice the zeta1 quantile at delta/3, and four times the zeta2 quantile.
    """
    zeta1 = noise_quantile(NoiseKind.ZETA1, replace(inputs, delta=inputs.delta / 3.0, variance_refinement=False))
    return 2.0 * zeta1, 4.0 * zeta2_quantile(inputs)


def expectation_delta(N: int) -> float:
    """Confidence level N^-2 at which the expectation bound is derived"""
    return 1.0 / (float(N) * float(N))


def lambda_expectation(B_X: float, B_Y: float, n: int, N: int, p: int) -> float:
    """lambda_semisup_misspec evaluated at delta = N^-2"""
    return lambda_semisup_misspec(BoundInputs(B_X=B_X, B_Y=B_Y, n=n, N=N, p=p, delta=expectation_delta(N)))


def min_overall_sample(p: int, B_X: float, sigma_inv_norm: float, delta: float) -> int:
    """ceil(18 B_X^2 p ||Sigma^-1|| log(3p/delta))"""
    return int(math.ceil(18.0 * B_X ** 2 * p * sigma_inv_norm * math.log(3.0 * p / delta)))


def expectation_N_condition(p: int, B_X: float, sigma_inv_norm: float, N: int) -> bool:
    """N >= 18 B_X^2 p ||Sigma^-1|| log(3 p N^2)"""
    return N >= 18.0 * B_X ** 2 * p * sigma_inv_norm * math.log(3.0 * p * float(N) * float(N))


def wellspec_N_condition(s_star: int, B_X: float, kappa_bar: float, delta: float, N: int, p: int) -> bool:
    """16 s_star B_X^2 sqrt(2 log(4p^2/delta)) <= kappa_bar sqrt(N)"""
    return 16.0 * s_star * B_X ** 2 * math.sqrt(2.0 * math.log(4.0 * p * p / delta)) <= kappa_bar * math.sqrt(N)


def transductive_rate_bound(inputs: BoundInputs, s: int, kappa: float) -> float:
    """
    Simplified transductive risk bound 64 B_Y^2 s log(2p/delta) / (kappa n_star),
    valid at lambda = lambda_transductive (gamma = 2) once n_star >= B_X^2 log(2p/delta).
    """
    L = math.log(2.0 * inputs.p / inputs.delta)
    if inputs.n_star < inputs.B_X ** 2 * L:
        raise ConditionViolationError(
            f"simplified rate needs n_star >= B_X^2 log(2p/delta) = {inputs.B_X ** 2 * L:.6g}"
        )
    return 64.0 * inputs.B_Y ** 2 * s * L / (kappa * inputs.n_star)


def lemma2_gap(mu: float, gamma: float, M, J: Sequence[int], beta, beta_prime) -> float:
    """
    RHS - LHS of the cone inequality

        2 mu / gamma (||beta - beta'||_1 + gamma ||beta||_1 - gamma ||beta'||_1) - (beta - beta')' M (beta - beta')
            <= 4 mu ||beta_Jc||_1 + (gamma + 1)^2 mu^2 |J| / (gamma^2 kappa_M(J, c_gamma))

    with c_gamma = (gamma + 1)/(gamma - 1). Nonnegative for all inputs.
    """
    if not mu > 0 or not gamma > 1:
        raise ValueError("need mu > 0 and gamma > 1")
    M = np.asarray(M, dtype=float)
    beta = np.asarray(beta, dtype=float)
    beta_prime = np.asarray(beta_prime, dtype=float)
    J = sorted(int(j) for j in J)
    complement = [j for j in range(beta.shape[0]) if j not in set(J)]
    diff = beta - beta_prime

    lhs = (2.0 * mu / gamma) * (np.abs(diff).sum() + gamma * np.abs(beta).sum() - gamma * np.abs(beta_prime).sum())
    lhs -= float(diff @ M @ diff)

    rhs = 4.0 * mu * np.abs(beta[complement]).sum()
    if J:
        kappa = compatibility(M, J, (gamma + 1.0) / (gamma - 1.0)).value
        stochastic = (gamma + 1.0) ** 2 * mu ** 2 * len(J) / gamma ** 2
        rhs += float('inf') if kappa <= 0 else stochastic / kappa
    return float(rhs - lhs)
