"""
Synthetic experiments

Rademacher-factor data generator, exact population risks, right-hand sides
of the risk bounds, single trials and seed-deterministic Monte Carlo
coverage campaigns.
"""

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from config import Config
from errors import ScopeError, ConditionViolationError, DimensionMismatchError, InvalidTrialError
from models.dataset import Bounds, GramMatrix, PartiallyLabeledDataset, Scope
from models.estimator import EstimatorVariant
from models.experiment import ExperimentConfig, Theorem
from models.model_spec import DesignSpec, ModelSpec, Nonlinearity, NonlinearityKind
from models.reports import (
    BoundCheck, ComparisonReport, CoverageReport, DiagnosticSummary, ExpectationCheck, TrialReport,
)
from services import tuning
from services.dataset import gram, labeled_moment
from services.estimators import fit
from services.geometry import (
    compatibility, weak_compatibility, restricted_eigenvalue_over_supports,
    sup_norm_deviation_threshold, lambda_min_validity, lambda_min_threshold,
)
from services.solver import fixed_point_gap

logger = logging.getLogger(__name__)

# Factors a nonlinearity may depend on before exact enumeration is refused
MAX_ENUMERATED_FACTORS = 20
MC_CHUNK = 65536
COVERAGE_CONFIDENCE = 0.99
# Random starts per support for the restricted eigenvalue inside a trial
TRIAL_RE_STARTS = 2


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Seed of trial `trial_index`, independent of every other trial"""
    return int(np.random.SeedSequence([master_seed, trial_index]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

def _draw_features(design: DesignSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    U = rng.integers(0, 2, size=(size, design.factor_count)) * 2.0 - 1.0
    return U @ design.normalized_loadings.T


def sample_dataset(model: ModelSpec, n: int, N: int, seed) -> PartiallyLabeledDataset:
    """
    Draw N feature rows, label the first n.

    Bounds attached to the dataset are the analytic ones of the model.
    """
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    rng = np.random.default_rng(seed)
    X = _draw_features(model.design, rng, N)
    h = model.noise_halfwidth
    noise = rng.uniform(-h, h, size=n) if h > 0 else np.zeros(n)
    Y = model.regression_function(X[:n]) + noise
    return PartiallyLabeledDataset(
        features=X, labels=Y, bounds=Bounds(B_X=model.design.B_X, B_Y=model.B_Y),
    )


def population_covariance(design: DesignSpec) -> GramMatrix:
    """Sigma_jl = w_j'w_l / (||w_j|| ||w_l||)"""
    V = design.normalized_loadings
    S = V @ V.T
    np.fill_diagonal(S, 1.0)
    return GramMatrix(matrix=(S + S.T) / 2.0, scope=Scope.POPULATION)


@dataclass(frozen=True, eq=False)
class PopulationMoments:
    """Exact second moments of the model: Sigma, E[X g(X)] and E[g(X)^2]"""
    sigma: np.ndarray
    nonlinear_cross: np.ndarray
    nonlinear_second: float


def population_moments(model: ModelSpec) -> PopulationMoments:
    """
    Enumerate the factor outcomes the nonlinearity depends on.

    Factors outside that set are independent of g and have mean zero, so
    E[X_j g] only sees the loadings of X_j on the enumerated factors.
    """
    sigma = population_covariance(model.design).matrix
    p = model.p
    if not model.nonlinearity.active:
        return PopulationMoments(sigma=sigma, nonlinear_cross=np.zeros(p), nonlinear_second=0.0)

    rows = [0, 1] if model.nonlinearity.kind is NonlinearityKind.BOUNDED_INTERACTION else [0]
    W = model.design.normalized_loadings
    factors = np.flatnonzero(np.any(W[rows] != 0, axis=0))
    if factors.size > MAX_ENUMERATED_FACTORS:
        raise ValueError(f"nonlinearity depends on {factors.size} factors, enumeration limit is {MAX_ENUMERATED_FACTORS}")
    U = np.array(list(itertools.product((-1.0, 1.0), repeat=int(factors.size))))
    partial_features = U @ W[:, factors].T
    g = model.nonlinear_part(partial_features)
    return PopulationMoments(
        sigma=sigma,
        nonlinear_cross=partial_features.T @ g / U.shape[0],
        nonlinear_second=float(np.mean(g ** 2)),
    )


def population_moment(model: ModelSpec, moments: Optional[PopulationMoments] = None) -> np.ndarray:
    """E[Y X] = Sigma beta_star + alpha E[X g(X)]"""
    moments = moments or population_moments(model)
    return moments.sigma @ model.beta_star + model.nonlinearity.alpha * moments.nonlinear_cross


def label_rms(model: ModelSpec, moments: Optional[PopulationMoments] = None) -> float:
    """E[Y^2]^(1/2)"""
    moments = moments or population_moments(model)
    beta, alpha = model.beta_star, model.nonlinearity.alpha
    second = (
        beta @ moments.sigma @ beta
        + 2.0 * alpha * beta @ moments.nonlinear_cross
        + alpha ** 2 * moments.nonlinear_second
        + model.noise_halfwidth ** 2 / 3.0
    )
    return float(math.sqrt(max(second, 0.0)))


def _as_beta(beta, p: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != p:
        raise DimensionMismatchError(f"beta has length {beta.shape[0]}, model has p={p}")
    return beta


def exact_excess_risk(beta, model: ModelSpec, moments: Optional[PopulationMoments] = None) -> float:
    """E[(f*(X) - X'beta)^2] in closed form"""
    moments = moments or population_moments(model)
    d = model.beta_star - _as_beta(beta, model.p)
    alpha = model.nonlinearity.alpha
    value = d @ moments.sigma @ d + 2.0 * alpha * moments.nonlinear_cross @ d + alpha ** 2 * moments.nonlinear_second
    return max(float(value), 0.0)


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    standard_error: float = 0.0
    exact: bool = True

    def to_dict(self):
        return {'value': float(self.value), 'standard_error': float(self.standard_error), 'exact': self.exact}


def excess_risk(beta, model: ModelSpec, mc_points: int = 0, seed=0,
                moments: Optional[PopulationMoments] = None) -> RiskEstimate:
    """
    Excess risk of x -> x'beta.

    Exact for well-specified models and whenever mc_points is 0; otherwise a
    Monte Carlo average over mc_points fresh feature draws.
    """
    beta = _as_beta(beta, model.p)
    if model.well_specified or mc_points == 0:
        return RiskEstimate(exact_excess_risk(beta, model, moments))
    if mc_points < 0:
        raise ValueError("mc_points must be >= 0")

    rng = np.random.default_rng(seed)
    losses = []
    remaining = mc_points
    while remaining > 0:
        size = min(remaining, MC_CHUNK)
        X = _draw_features(model.design, rng, size)
        losses.append((model.regression_function(X) - X @ beta) ** 2)
        remaining -= size
    losses = np.concatenate(losses)
    stderr = float(losses.std(ddof=1) / math.sqrt(mc_points)) if mc_points > 1 else 0.0
    return RiskEstimate(float(losses.mean()), stderr, exact=False)


def transductive_risk(beta, model: ModelSpec, unlabeled_features) -> float:
    """(1/m) sum over unlabeled rows of (x'beta - f*(x))^2"""
    X = np.asarray(unlabeled_features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ScopeError("transductive risk needs at least one unlabeled row")
    beta = _as_beta(beta, model.p)
    residual = X @ beta - model.regression_function(X)
    return float(np.mean(residual ** 2))


# ---------------------------------------------------------------------------
# Oracle right-hand sides
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Candidate:
    """A (beta, J) pair plugged into an oracle inequality"""
    beta: np.ndarray
    J: Tuple[int, ...]
    label: str = ''


def support_prefixes(model: ModelSpec) -> List[Tuple[int, ...]]:
    """Supports made of the k largest |beta_star| entries, k = 0..s_star"""
    order = sorted(model.support, key=lambda j: (-abs(model.beta_star[j]), j))
    return [tuple(sorted(order[:k])) for k in range(len(order) + 1)]


def population_refit(model: ModelSpec, support: Sequence[int],
                     moments: Optional[PopulationMoments] = None) -> np.ndarray:
    """argmin of the excess risk over vectors supported on `support`"""
    beta = np.zeros(model.p)
    idx = list(support)
    if not idx:
        return beta
    moments = moments or population_moments(model)
    # E[YX] = E[f*(X) X] since the noise is independent with mean zero
    target = population_moment(model, moments)
    beta[idx] = np.linalg.lstsq(moments.sigma[np.ix_(idx, idx)], target[idx], rcond=None)[0]
    return beta


def empirical_refit(model: ModelSpec, support: Sequence[int], features) -> np.ndarray:
    """Least squares of f*(x) on the columns in `support`, over the given rows"""
    beta = np.zeros(model.p)
    idx = list(support)
    if not idx:
        return beta
    X = np.asarray(features, dtype=float)
    beta[idx] = np.linalg.lstsq(X[:, idx], model.regression_function(X), rcond=None)[0]
    return beta


def _clip_l1(beta: np.ndarray, budget: float) -> np.ndarray:
    l1 = float(np.abs(beta).sum())
    return beta * (budget / l1) if l1 > budget else beta


def build_candidates(model: ModelSpec, lam: float, n: int, N: int,
                     moments: Optional[PopulationMoments] = None,
                     unlabeled_features=None) -> Tuple[Candidate, ...]:
    """
    beta_star, beta_star restricted to each prefix support, and the least
    squares refit on each prefix support (over the unlabeled rows when they
    are given, in population otherwise) clipped to the l1 budget.
    """
    budget = model.B_Y ** 2 * N / (2.0 * n * lam)
    candidates = []
    for S in support_prefixes(model):
        idx = list(S)
        restricted = np.zeros(model.p)
        restricted[idx] = model.beta_star[idx]
        if unlabeled_features is not None:
            refit = empirical_refit(model, S, unlabeled_features)
        else:
            refit = population_refit(model, S, moments)
        candidates.append(Candidate(model.beta_star, S, 'beta_star'))
        candidates.append(Candidate(restricted, S, 'restricted'))
        candidates.append(Candidate(_clip_l1(refit, budget), S, 'refit'))
    return tuple(candidates)


@dataclass(frozen=True, eq=False)
class OracleContext:
    """Everything oracle_rhs needs for one dataset"""
    model: ModelSpec
    dataset: PartiallyLabeledDataset
    lam: float
    gamma: float = 2.0
    delta: float = 0.1
    moments: Optional[PopulationMoments] = None
    sigma_inv_norm: Optional[float] = None
    kappa_bar_population: Optional[float] = None
    candidates: Optional[Tuple[Candidate, ...]] = None
    re_starts: int = TRIAL_RE_STARTS
    seed: int = 0


@dataclass(frozen=True, eq=False)
class OracleBound:
    """
    Value of a bound at its best candidate.

    Unpacks as (value, candidate).
    """
    value: float
    candidate: Candidate
    cone_constant: Optional[float] = None
    certified: bool = True
    tail_term_proof: Optional[float] = None

    def __iter__(self):
        yield self.value
        yield self.candidate


def _complement_l1(beta: np.ndarray, J: Sequence[int]) -> float:
    mask = np.ones(beta.shape[0], dtype=bool)
    mask[list(J)] = False
    return float(np.abs(beta[mask]).sum())


def _cone_term(coefficient: float, J: Sequence[int], kappa: Optional[float]) -> float:
    """coefficient |J| / kappa, 0 for an empty J"""
    if not J:
        return 0.0
    if kappa is None or kappa <= 0:
        return float('inf')
    return coefficient * len(J) / kappa


def check_preconditions(theorem: Theorem, model: ModelSpec, n: int, N: int, delta: float,
                        sigma_inv_norm: float, kappa_bar_population: Optional[float] = None) -> Optional[float]:
    """
    Raise when the bound does not apply to this setting.

    Returns the population weak compatibility constant for T2_b (computed
    here unless given), None otherwise.
    """
    theorem = Theorem(theorem)
    p, B_X = model.p, model.design.B_X
    if theorem is Theorem.T1 and N <= n:
        raise ScopeError("T1 needs unlabeled rows (N > n)")
    if theorem.needs_well_specified:
        if not model.well_specified:
            raise ConditionViolationError(f"{theorem.value} needs a well-specified model")
        if model.s_star < 1:
            raise ConditionViolationError(f"{theorem.value} needs s_star >= 1")
    if theorem in (Theorem.T3, Theorem.COR1):
        required = tuning.min_overall_sample(p, B_X, sigma_inv_norm, delta)
        if N < required:
            raise ConditionViolationError(f"{theorem.value} needs N >= {required}, got N={N}")
    if theorem is Theorem.T4 and not tuning.expectation_N_condition(p, B_X, sigma_inv_norm, N):
        raise ConditionViolationError(f"T4 needs N >= 18 B_X^2 p ||Sigma^-1|| log(3 p N^2), got N={N}")
    if theorem is Theorem.T2_B:
        if kappa_bar_population is None:
            sigma = population_covariance(model.design).matrix
            kappa_bar_population = weak_compatibility(sigma, model.support, 3.0).value
        if not tuning.wellspec_N_condition(model.s_star, B_X, kappa_bar_population, delta, N, p):
            raise ConditionViolationError(
                f"T2_b needs 16 s_star B_X^2 sqrt(2 log(4p^2/delta)) <= kappa_bar sqrt(N), got N={N}"
            )
        return kappa_bar_population
    return None


def _best(scored: List[Tuple[float, Candidate, Optional[float]]]) -> Tuple[float, Candidate, Optional[float]]:
    # first minimum wins so ties resolve in candidate order
    return min(scored, key=lambda item: item[0])


def _rhs_transductive(context: OracleContext, moments: PopulationMoments) -> OracleBound:
    model, d, lam, gamma = context.model, context.dataset, context.lam, context.gamma
    X_unlab = d.unlabeled_features
    M = gram(d, Scope.UNLABELED).matrix
    c_gamma = (gamma + 1.0) / (gamma - 1.0)
    coefficient = (gamma + 1.0) ** 2 * lam ** 2 / gamma ** 2
    candidates = context.candidates or build_candidates(model, lam, d.n, d.N, moments, unlabeled_features=X_unlab)

    kappas: Dict[Tuple[int, ...], float] = {}
    scored = []
    for candidate in candidates:
        J = candidate.J
        if J and J not in kappas:
            kappas[J] = compatibility(M, J, c_gamma).value
        value = (
            transductive_risk(candidate.beta, model, X_unlab)
            + 4.0 * lam * _complement_l1(candidate.beta, J)
            + _cone_term(coefficient, J, kappas.get(J))
        )
        scored.append((value, candidate, kappas.get(J)))
    value, candidate, kappa = _best(scored)
    return OracleBound(value, candidate, kappa)


def _rhs_wellspec_sample(context: OracleContext) -> OracleBound:
    model, d, lam = context.model, context.dataset, context.lam
    J, s = model.support, model.s_star
    M = gram(d, Scope.ALL).matrix
    sigma_norm = population_covariance(model.design).spectral_norm()

    kappa_bar = weak_compatibility(M, J, 3.0).value
    compat_term = (6.0 * lam * s / kappa_bar) ** 2 if kappa_bar > 0 else float('inf')
    kappa_re = restricted_eigenvalue_over_supports(
        M, s, 3.0, starts=context.re_starts, seed=context.seed, extra_supports=[J],
    ).value
    re_term = 9.0 * sigma_norm * lam ** 2 * s / kappa_re ** 2 if kappa_re > 0 else float('inf')

    candidate = Candidate(model.beta_star, J, 'beta_star')
    if compat_term <= re_term:
        return OracleBound(compat_term, candidate, kappa_bar, certified=True)
    # the restricted eigenvalue is a search result, i.e. an upper estimate of the true constant
    return OracleBound(re_term, candidate, kappa_re, certified=False)


def _rhs_wellspec_population(context: OracleContext) -> OracleBound:
    model, lam = context.model, context.lam
    kappa_bar = context.kappa_bar_population
    if kappa_bar is None:
        kappa_bar = weak_compatibility(population_covariance(model.design).matrix, model.support, 3.0).value
    value = 9.0 * lam ** 2 * model.s_star / kappa_bar if kappa_bar > 0 else float('inf')
    return OracleBound(value, Candidate(model.beta_star, model.support, 'beta_star'), kappa_bar)


def _rhs_fixed_support(context: OracleContext, moments: PopulationMoments) -> OracleBound:
    model, d, lam = context.model, context.dataset, context.lam
    J = model.support
    kappa = compatibility(gram(d, Scope.ALL).matrix, J, 3.0).value if J else None
    candidates = context.candidates or build_candidates(model, lam, d.n, d.N, moments)
    stochastic = _cone_term(9.0 * lam ** 2 / 2.0, J, kappa)
    scored = []
    for candidate in candidates:
        value = (
            exact_excess_risk(candidate.beta, model, moments)
            + 4.0 * lam * _complement_l1(candidate.beta, J)
            + stochastic
        )
        scored.append((value, Candidate(candidate.beta, J, candidate.label), kappa))
    value, candidate, kappa = _best(scored)
    return OracleBound(value, candidate, kappa)


def _inverse_form(context: OracleContext, moments: PopulationMoments, sigma_inv_norm: float) -> OracleBound:
    model, d, lam = context.model, context.dataset, context.lam
    candidates = context.candidates or build_candidates(model, lam, d.n, d.N, moments)
    coefficient = 27.0 * sigma_inv_norm / 4.0 * lam ** 2
    scored = []
    for candidate in candidates:
        value = (
            exact_excess_risk(candidate.beta, model, moments)
            + 4.0 * lam * _complement_l1(candidate.beta, candidate.J)
            + coefficient * len(candidate.J)
        )
        scored.append((value, candidate, None))
    value, candidate, _ = _best(scored)
    return OracleBound(value, candidate)


def expectation_tail_terms(B_Y: float, n: int, N: int, p: int) -> float:
    """2 B_Y^2 / N^2 + B_Y^2 / (2^7 n log^2(6 p N^2))"""
    log_term = math.log(6.0 * p * float(N) * float(N))
    return 2.0 * B_Y ** 2 / float(N) ** 2 + B_Y ** 2 / (2.0 ** 7 * n * log_term ** 2)


def oracle_rhs(theorem: Theorem, context: OracleContext) -> OracleBound:
    """
    Right-hand side of the bound `theorem`, minimized over a finite
    candidate list. Any candidate gives a valid upper bound on the infimum,
    so coverage checked against it is conservative.
    """
    theorem = Theorem(theorem)
    model, d = context.model, context.dataset
    moments = context.moments or population_moments(model)
    sigma_inv_norm = context.sigma_inv_norm
    if sigma_inv_norm is None:
        sigma_inv_norm = GramMatrix(moments.sigma, Scope.POPULATION).inverse_norm()
    kappa_bar_population = check_preconditions(
        theorem, model, d.n, d.N, context.delta, sigma_inv_norm, context.kappa_bar_population,
    )

    if theorem is Theorem.T1:
        return _rhs_transductive(context, moments)
    if theorem is Theorem.T2_A:
        return _rhs_wellspec_sample(context)
    if theorem is Theorem.T2_B:
        return _rhs_wellspec_population(dataclasses.replace(context, kappa_bar_population=kappa_bar_population))
    if theorem is Theorem.T3:
        return _rhs_fixed_support(context, moments)

    bound = _inverse_form(context, moments, sigma_inv_norm)
    if theorem is Theorem.COR1:
        return bound
    B_Y = model.B_Y
    return OracleBound(
        bound.value + expectation_tail_terms(B_Y, d.n, d.N, model.p),
        bound.candidate,
        tail_term_proof=B_Y ** 4 / (2.0 * d.n ** 2 * context.lam ** 2),
    )


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def build_model(config: ExperimentConfig) -> ModelSpec:
    """beta_star = +/- beta_magnitude (alternating) on the first s_star coordinates"""
    beta = np.zeros(config.p)
    beta[:config.s_star] = config.beta_magnitude * (-1.0) ** np.arange(config.s_star)
    return ModelSpec(
        beta_star=beta,
        design=DesignSpec.named(config.design, config.p),
        nonlinearity=Nonlinearity(config.nonlinearity, config.alpha),
        noise_halfwidth=config.noise_halfwidth,
    )


def bound_inputs(config: ExperimentConfig, model: ModelSpec, sigma_inv_norm: float = 1.0) -> tuning.BoundInputs:
    return tuning.BoundInputs(
        B_X=model.design.B_X, B_Y=model.B_Y, n=config.n, N=config.N, p=config.p,
        delta=config.delta, sigma_inv_norm=sigma_inv_norm, gamma=config.gamma,
    )


def choose_lambda(config: ExperimentConfig, model: ModelSpec, sigma_inv_norm: float = 1.0) -> float:
    """The smallest lambda the configured bound allows, times lambda_slack"""
    inputs = bound_inputs(config, model, sigma_inv_norm)
    theorem = config.theorem
    if theorem is Theorem.T1:
        base = tuning.lambda_transductive(inputs)
    elif theorem.needs_well_specified:
        base = tuning.lambda_semisup_wellspec(inputs)
    elif theorem is Theorem.T4:
        base = tuning.lambda_expectation(inputs.B_X, inputs.B_Y, config.n, config.N, config.p)
    else:
        base = tuning.lambda_semisup_misspec(inputs)
    return config.lambda_slack * base


@dataclass(frozen=True, eq=False)
class ExperimentSetup:
    """Per-config quantities shared by every trial"""
    config: ExperimentConfig
    model: ModelSpec
    moments: PopulationMoments
    sigma_inv_norm: float
    sigma_inv_sqrt: np.ndarray
    lam: float
    kappa_bar_population: Optional[float] = None
    candidates: Optional[Tuple[Candidate, ...]] = None


def prepare_experiment(config: ExperimentConfig, check: bool = True) -> ExperimentSetup:
    """Build the model, its exact moments and lambda; optionally check the bound applies"""
    model = build_model(config)
    moments = population_moments(model)
    eigenvalues, eigenvectors = np.linalg.eigh(moments.sigma)
    sigma_inv_norm = 1.0 / eigenvalues[0] if eigenvalues[0] > 0 else float('inf')
    sigma_inv_sqrt = (eigenvectors / np.sqrt(np.maximum(eigenvalues, 1e-300))) @ eigenvectors.T
    lam = choose_lambda(config, model, sigma_inv_norm)

    kappa_bar_population = None
    if check:
        kappa_bar_population = check_preconditions(
            config.theorem, model, config.n, config.N, config.delta, sigma_inv_norm,
        )
    # data-independent candidates for every bound stated in population risk
    candidates = None if config.theorem in (Theorem.T1, Theorem.T2_A, Theorem.T2_B) else \
        build_candidates(model, lam, config.n, config.N, moments)

    logger.info(
        f"{config.theorem.value}: p={config.p}, n={config.n}, N={config.N}, s_star={model.s_star}, "
        f"B_X={model.design.B_X:.6g}, B_Y={model.B_Y:.6g}, lambda={lam:.6g}"
    )
    return ExperimentSetup(
        config=config, model=model, moments=moments, sigma_inv_norm=float(sigma_inv_norm),
        sigma_inv_sqrt=sigma_inv_sqrt, lam=lam,
        kappa_bar_population=kappa_bar_population, candidates=candidates,
    )


def _upper(value: float, bound: float, deterministic: bool = False) -> BoundCheck:
    return BoundCheck(value=float(value), bound=float(bound), holds=bool(value <= bound), deterministic=deterministic)


def _fixed_point_check(problem, beta_hat: np.ndarray, kkt: float, probes: np.ndarray) -> BoundCheck:
    """
    Worst probe of the fixed-point inequality.

    An approximate minimizer with KKT residual r satisfies gap >= -2 r ||beta_hat - beta||_1,
    so value = max over probes of -(gap + tolerance) must stay <= 0.
    """
    G = problem.G
    worst = -float('inf')
    for beta in probes:
        diff = beta_hat - beta
        gap = fixed_point_gap(problem, beta_hat, beta)
        scale = (
            abs(beta @ G @ beta) + abs(beta_hat @ G @ beta_hat) + abs(diff @ G @ diff)
            + 2.0 * abs(problem.b @ diff) + 2.0 * problem.lam * (np.abs(beta).sum() + np.abs(beta_hat).sum())
        )
        tolerance = 2.0 * kkt * float(np.abs(diff).sum()) + 1e-9 * (1.0 + scale)
        worst = max(worst, -(gap + tolerance))
    return BoundCheck(value=worst, bound=0.0, holds=worst <= 0.0, deterministic=True)


def trial_diagnostics(setup: ExperimentSetup, d: PartiallyLabeledDataset, problem, beta_hat: np.ndarray,
                      kkt: float, seed: int, variant: EstimatorVariant) -> Dict[str, BoundCheck]:
    """Deterministic and probabilistic inequalities evaluated on one dataset"""
    config, model, moments = setup.config, setup.model, setup.moments
    p, n, N, B_X, delta = d.p, d.n, d.N, model.design.B_X, config.delta
    inputs = bound_inputs(config, model, setup.sigma_inv_norm)
    checks: Dict[str, BoundCheck] = {}

    if config.probes > 0:
        rng = np.random.default_rng([seed, 1])
        scale = max(1.0, config.beta_magnitude)
        probes = rng.standard_normal((config.probes, p)) * scale * (rng.random((config.probes, p)) < 0.5)
        checks['fixed_point'] = _fixed_point_check(problem, beta_hat, kkt, probes)

    if variant is EstimatorVariant.SEMISUPERVISED:
        budget = model.B_Y ** 2 * N / (2.0 * n * setup.lam)
        checks['l1_budget'] = _upper(np.abs(beta_hat).sum(), budget + 1e-8, deterministic=True)

    b = labeled_moment(d)
    checks['zeta1'] = _upper(
        np.max(np.abs(b - population_moment(model, moments))),
        tuning.noise_quantile(tuning.NoiseKind.ZETA1, inputs),
    )
    if d.m > 0:
        X_unlab = d.unlabeled_features
        unlabeled_mean = X_unlab.T @ model.regression_function(X_unlab) / d.m
        checks['zeta'] = _upper(np.max(np.abs(b - unlabeled_mean)), tuning.noise_quantile(tuning.NoiseKind.ZETA, inputs))
    overall_mean = d.features.T @ model.regression_function(d.features) / N
    checks['zeta_bar'] = _upper(np.max(np.abs(b - overall_mean)), tuning.noise_quantile(tuning.NoiseKind.ZETA_BAR, inputs))

    sigma_hat = gram(d, Scope.ALL).matrix
    deviation = moments.sigma - sigma_hat
    checks['zeta2'] = _upper(np.max(np.abs(deviation @ model.beta_star)), tuning.zeta2_quantile(inputs))
    checks['hoeffding'] = _upper(np.max(np.abs(deviation)), sup_norm_deviation_threshold(p, N, B_X, delta))

    if lambda_min_validity(p, N, B_X, setup.sigma_inv_norm, delta):
        threshold = lambda_min_threshold(p, N, B_X, setup.sigma_inv_norm, delta)
        whitened = setup.sigma_inv_sqrt @ sigma_hat @ setup.sigma_inv_sqrt
        smallest = float(np.linalg.eigvalsh((whitened + whitened.T) / 2.0)[0])
        checks['lambda_min'] = BoundCheck(value=smallest, bound=threshold, holds=smallest >= threshold)
    return checks


def run_trial(config: ExperimentConfig, trial_index: int, setup: Optional[ExperimentSetup] = None) -> TrialReport:
    """
    Sample, fit, score and bound one dataset.

    Deterministic given (config.master_seed, trial_index). A solver that
    stops before reaching tolerance marks the trial invalid.
    """
    setup = setup or prepare_experiment(config)
    model = setup.model
    seed = trial_seed(config.master_seed, trial_index)
    d = sample_dataset(model, config.n, config.N, seed)

    variant = config.estimator_variant
    result = fit(d, variant, setup.lam)
    solution = result.solution
    beta_hat = solution.beta_hat

    excess = excess_risk(beta_hat, model, mc_points=config.risk_mc_points, seed=[seed, 2], moments=setup.moments)
    transductive = transductive_risk(beta_hat, model, d.unlabeled_features) if d.m > 0 else None
    risk = transductive if config.theorem is Theorem.T1 else excess.value

    context = OracleContext(
        model=model, dataset=d, lam=setup.lam, gamma=config.gamma, delta=config.delta,
        moments=setup.moments, sigma_inv_norm=setup.sigma_inv_norm,
        kappa_bar_population=setup.kappa_bar_population, candidates=setup.candidates, seed=seed,
    )
    bound = oracle_rhs(config.theorem, context)
    diagnostics = trial_diagnostics(setup, d, result.problem, beta_hat, solution.kkt_residual, seed, variant)

    logger.debug(f"trial {trial_index}: risk={risk:.6g}, rhs={bound.value:.6g}, sweeps={solution.sweeps}")
    return TrialReport(
        trial_index=trial_index,
        seed=seed,
        theorem=config.theorem.value,
        variant=variant.value,
        lam=setup.lam,
        excess_risk=excess.value,
        excess_risk_stderr=excess.standard_error,
        transductive_risk=transductive,
        risk=risk,
        rhs_bound=bound.value,
        covered=bool(risk <= bound.value),
        kkt_residual=solution.kkt_residual,
        sweeps=solution.sweeps,
        valid=solution.converged,
        candidate_beta=tuple(float(v) for v in bound.candidate.beta),
        candidate_J=tuple(bound.candidate.J),
        cone_constant_used=bound.cone_constant,
        rhs_certified=bound.certified,
        l1_norm=float(np.abs(beta_hat).sum()),
        diagnostics=diagnostics,
        tail_term_proof=bound.tail_term_proof,
    )


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def coverage_slack(delta: float, trials: int) -> float:
    """Two-sided 99% normal half-width of a binomial proportion at 1 - delta"""
    return float(norm.ppf(0.5 + COVERAGE_CONFIDENCE / 2.0) * math.sqrt(delta * (1.0 - delta) / trials))


def summarize_diagnostics(reports: Sequence[TrialReport], delta: float) -> Dict[str, DiagnosticSummary]:
    """Deterministic checks must hold on every trial, probabilistic ones at 1 - delta - slack"""
    names = sorted({name for report in reports for name in report.diagnostics})
    summaries = {}
    for name in names:
        checks = [report.diagnostics[name] for report in reports if name in report.diagnostics]
        coverage = float(np.mean([check.holds for check in checks]))
        deterministic = all(check.deterministic for check in checks)
        if deterministic:
            passed = coverage == 1.0
        else:
            passed = coverage >= 1.0 - delta - coverage_slack(delta, len(checks))
        summaries[name] = DiagnosticSummary(len(checks), coverage, deterministic, passed)
    return summaries


def _map_trials(worker, indices: Sequence[int], jobs: int) -> list:
    jobs = max(1, min(int(jobs), Config.MAX_JOBS))
    if jobs == 1:
        return [worker(i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        # map keeps submission order, so results do not depend on scheduling
        return list(executor.map(worker, indices, chunksize=max(1, len(indices) // (4 * jobs))))


def run_monte_carlo(config: ExperimentConfig, trials: Optional[int] = None, master_seed: Optional[int] = None,
                    jobs: int = 1) -> CoverageReport:
    """
    Run `trials` independent trials and aggregate coverage.

    For T4 the pass criterion is the mean excess risk against the bound in
    expectation, within three standard errors.
    """
    trials = config.trials if trials is None else trials
    master_seed = config.master_seed if master_seed is None else master_seed
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = dataclasses.replace(config, trials=trials, master_seed=master_seed)
    setup = prepare_experiment(config)

    reports: List[TrialReport] = _map_trials(partial(run_trial, config, setup=setup), range(trials), jobs)
    for report in reports:
        if not report.valid:
            raise InvalidTrialError(
                report.seed, report.trial_index,
                f"coordinate descent stopped with KKT residual {report.kkt_residual:.3e} after {report.sweeps} sweeps",
            )

    delta = config.delta
    coverage = float(np.mean([report.covered for report in reports]))
    slack = coverage_slack(delta, trials)
    diagnostics = summarize_diagnostics(reports, delta)

    expectation = None
    if config.theorem is Theorem.T4:
        risks = np.array([report.excess_risk for report in reports])
        stderr = float(risks.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        rhs = float(np.mean([report.rhs_bound for report in reports]))
        mean = float(risks.mean())
        expectation = ExpectationCheck(mean, stderr, rhs, passed=mean <= rhs + 3.0 * stderr)

    primary = expectation.passed if expectation is not None else coverage >= 1.0 - delta - slack
    passed = primary and all(s.passed for s in diagnostics.values() if s.deterministic)
    logger.info(
        f"{config.theorem.value}: coverage {coverage:.4f} over {trials} trials "
        f"(target {1.0 - delta:.4f}, slack {slack:.4f}) -> {'pass' if passed else 'FAIL'}"
    )
    return CoverageReport(
        theorem=config.theorem.value,
        master_seed=master_seed,
        trials=trials,
        coverage=coverage,
        delta=delta,
        slack=slack,
        passed=passed,
        seeds=tuple(report.seed for report in reports),
        diagnostics=diagnostics,
        expectation=expectation,
        trial_reports=tuple(reports),
    )


def _paired_trial(config: ExperimentConfig, setup: ExperimentSetup,
                  variants: Tuple[EstimatorVariant, EstimatorVariant], trial_index: int) -> dict:
    seed = trial_seed(config.master_seed, trial_index)
    d = sample_dataset(setup.model, config.n, config.N, seed)
    row = {'trial_index': trial_index, 'seed': seed}
    for variant in variants:
        solution = fit(d, variant, setup.lam).solution
        if not solution.converged:
            raise InvalidTrialError(seed, trial_index, f"{variant.value} fit did not converge")
        row[variant.value] = excess_risk(
            solution.beta_hat, setup.model, mc_points=config.risk_mc_points, seed=[seed, 2], moments=setup.moments,
        ).value
    return row


def run_paired_comparison(config: ExperimentConfig, trials: Optional[int] = None,
                          master_seed: Optional[int] = None,
                          variants: Sequence[EstimatorVariant] = (EstimatorVariant.SEMISUPERVISED,
                                                                  EstimatorVariant.SUPERVISED),
                          jobs: int = 1) -> ComparisonReport:
    """
    Fit two variants on the same datasets with the same lambda and compare
    their excess risks. Passes when the first variant has the smaller median.
    """
    variants = tuple(EstimatorVariant(v) for v in variants)
    if len(variants) != 2:
        raise ValueError("exactly two variants are compared")
    trials = config.trials if trials is None else trials
    master_seed = config.master_seed if master_seed is None else master_seed
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = dataclasses.replace(config, trials=trials, master_seed=master_seed)
    setup = prepare_experiment(config, check=False)

    rows = _map_trials(partial(_paired_trial, config, setup, variants), range(trials), jobs)
    first = np.array([row[variants[0].value] for row in rows])
    second = np.array([row[variants[1].value] for row in rows])
    medians = (float(np.median(first)), float(np.median(second)))
    logger.info(
        f"{variants[0].value} vs {variants[1].value}: medians {medians[0]:.6g} / {medians[1]:.6g} over {trials} trials"
    )
    return ComparisonReport(
        variants=(variants[0].value, variants[1].value),
        master_seed=master_seed,
        trials=trials,
        medians=medians,
        win_fraction=float(np.mean(first <= second)),
        passed=medians[0] <= medians[1],
        rows=tuple(rows),
    )
