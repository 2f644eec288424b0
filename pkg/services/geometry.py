"""
Cone constants of a PSD matrix and deterministic concentration thresholds

For J a support and c > 0 the cone is {v : ||v_Jc||_1 <= c ||v_J||_1} and

    compatibility         kappa(J, c)    = inf c^2 |J| v'Mv / (c ||v_J||_1 - ||v_Jc||_1)^2
    weak compatibility    kappa_bar(J, c) = inf |J| v'Mv / ||v_J||_1^2
    restricted eigenvalue kappa_re(J, c)  = inf v'Mv / ||v_J||_2^2

The first two are computed exactly by enumerating the sign patterns of v_J;
each pattern is a convex QP over a polyhedron, solved with scipy.optimize
(SLSQP, trust-constr as fallback) and finished with an active-set KKT solve.
The third is a multi-start local search.
"""

import itertools
import logging
from math import log, sqrt
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, minimize

from config import Config
from errors import EnumerationLimitError, ConditionViolationError, DimensionMismatchError
from models.reports import ConeKind, Certification, ConeConstantReport
from utils.linalg import symmetric_psd

logger = logging.getLogger(__name__)

# Supports enumerated exhaustively by restricted_eigenvalue_over_supports
RE_ENUMERATION_MAX_P = 20
RE_ENUMERATION_MAX_S = 3

SAMPLE_CHUNK = 4096


# ---------------------------------------------------------------------------
# Support handling and the defining ratios
# ---------------------------------------------------------------------------

def _support(J: Sequence[int], p: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    support = tuple(sorted({int(j) for j in J}))
    if len(support) != len(list(J)):
        raise ValueError(f"Support has repeated indices: {list(J)}")
    if support and (support[0] < 0 or support[-1] >= p):
        raise DimensionMismatchError(f"Support {list(support)} out of range for p={p}")
    complement = np.array([j for j in range(p) if j not in set(support)], dtype=int)
    return support, complement


def cone_ratio(M, J: Sequence[int], c: float, kind: ConeKind, v) -> float:
    """
    Defining ratio of `kind` at direction v; +inf outside the cone or where
    the ratio is undefined.
    """
    M = np.asarray(M, dtype=float)
    v = np.asarray(v, dtype=float)
    support, complement = _support(J, M.shape[0])
    idx = list(support)
    l1_J = float(np.abs(v[idx]).sum())
    l1_Jc = float(np.abs(v[complement]).sum())
    if l1_J == 0 or l1_Jc > c * l1_J * (1 + 1e-12):
        return float('inf')
    quad = max(float(v @ M @ v), 0.0)
    kind = ConeKind(kind)
    if kind is ConeKind.COMPATIBILITY:
        gap = c * l1_J - l1_Jc
        return float('inf') if gap <= 0 else c * c * len(idx) * quad / (gap * gap)
    if kind is ConeKind.WEAK_COMPATIBILITY:
        return len(idx) * quad / (l1_J * l1_J)
    return quad / float(v[idx] @ v[idx])


# ---------------------------------------------------------------------------
# Projection (restricted eigenvalue search)
# ---------------------------------------------------------------------------

def _project_simplex(y: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = radius}"""
    if y.size == 0:
        return y.copy()
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, y.size + 1)
    rho = ind[u - css / ind > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(y - theta, 0.0)


def _project_l1_ball(y: np.ndarray, radius: float) -> np.ndarray:
    if np.abs(y).sum() <= radius:
        return y.copy()
    if radius <= 0:
        return np.zeros_like(y)
    return np.sign(y) * _project_simplex(np.abs(y), radius)


# ---------------------------------------------------------------------------
# Sign-pattern QP: min x'Qx over {x >= 0, lb <= A x <= ub}
# ---------------------------------------------------------------------------

# support thresholds (relative to max x) tried when finishing a solver point
_POLISH_THRESHOLDS = (1e-9, 1e-7, 1e-5, 1e-3)

# tried in order on each sign-pattern QP
_QP_METHODS = ('SLSQP', 'trust-constr')


class _PatternQP:
    def __init__(self, Q: np.ndarray, A: np.ndarray, lb: Sequence[float], ub: Sequence[float]):
        self.Q = Q
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.lb = np.asarray(lb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)

    def value(self, x: np.ndarray) -> float:
        return float(x @ self.Q @ x)

    def feasible(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        Ax = self.A @ x
        return bool(np.all(x >= -tol) and np.all(Ax >= self.lb - tol) and np.all(Ax <= self.ub + tol))

    def _rows(self) -> List[Tuple[np.ndarray, str, float]]:
        rows = []
        for e, lo, hi in zip(self.A, self.lb, self.ub):
            if lo == hi:
                rows.append((e, '==', float(lo)))
            elif np.isinf(hi):
                rows.append((e, '>=', float(lo)))
            else:
                rows.append((e, '<=', float(hi)))
        return rows

    def _polish(self, x: np.ndarray, threshold: float) -> Optional[np.ndarray]:
        """Solve the equality-constrained QP on the support of x and certify it by KKT"""
        top = float(np.max(x)) if x.size else 0.0
        if top <= 0:
            return None
        S = np.flatnonzero(x > threshold * top)
        rows = self._rows()
        subsets = [()]
        for k, (_, sense, _) in enumerate(rows):
            if sense != '==':
                subsets = [s + (k,) for s in subsets] + subsets
        for dropped in subsets:
            active = [i for i in range(len(rows)) if i not in dropped]
            if not active:
                continue
            E = np.array([rows[i][0] for i in active])
            r = np.array([rows[i][2] for i in active])
            k = len(active)
            kkt = np.zeros((S.size + k, S.size + k))
            kkt[:S.size, :S.size] = 2.0 * self.Q[np.ix_(S, S)]
            kkt[:S.size, S.size:] = -E[:, S].T
            kkt[S.size:, :S.size] = E[:, S]
            rhs = np.concatenate((np.zeros(S.size), r))
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            scale = max(1.0, float(np.max(np.abs(kkt))) * float(np.max(np.abs(sol))))
            if not np.allclose(kkt @ sol, rhs, rtol=1e-9, atol=1e-11 * scale):
                continue
            candidate = np.zeros_like(x)
            candidate[S] = sol[:S.size]
            if np.any(candidate < -1e-12) or not self.feasible(candidate):
                continue
            candidate = np.maximum(candidate, 0.0)
            if self._kkt_holds(candidate, [rows[i] for i in active], sol[S.size:]):
                return candidate
        return None

    def _kkt_holds(self, x: np.ndarray, active: List[Tuple[np.ndarray, str, float]], mu: np.ndarray) -> bool:
        grad = 2.0 * (self.Q @ x)
        E = np.array([row[0] for row in active])
        nu = grad - E.T @ mu
        scale = max(1.0, float(np.max(np.abs(grad))), float(np.max(np.abs(E.T @ mu))))
        tol = 1e-9 * scale
        for (_, sense, _), m in zip(active, mu):
            if sense == '>=' and m < -tol:
                return False
            if sense == '<=' and m > tol:
                return False
        off = x <= 0
        return bool(np.all(nu[off] >= -tol)) and bool(np.all(np.abs(nu[~off]) <= tol))

    def _minimize(self, x0: np.ndarray, method: str, tol: float, max_iter: int):
        n = x0.size
        kwargs = dict(
            jac=lambda x: 2.0 * (self.Q @ x),
            method=method,
            bounds=Bounds(np.zeros(n), np.full(n, np.inf)),
            constraints=[LinearConstraint(self.A, self.lb, self.ub)],
        )
        if method == 'trust-constr':
            kwargs['hess'] = lambda x: 2.0 * self.Q
            kwargs['options'] = {'gtol': tol, 'xtol': tol, 'barrier_tol': tol, 'maxiter': max_iter}
        else:
            kwargs['options'] = {'ftol': tol, 'maxiter': max_iter}
        return minimize(self.value, x0, **kwargs)

    def solve(self, x0: np.ndarray, tol: float, max_iter: int) -> Tuple[np.ndarray, bool]:
        """
        SLSQP from x0 (trust-constr if that cannot be finished), then an exact
        KKT solve on the support found. Without a KKT finish the best feasible
        point seen is returned, certified only when scipy reported success.
        """
        if not np.any(self.Q):
            return x0, True
        best, succeeded = x0, False
        for method in _QP_METHODS:
            result = self._minimize(x0, method, tol, max_iter)
            x = np.maximum(result.x, 0.0)
            for threshold in _POLISH_THRESHOLDS:
                polished = self._polish(x, threshold)
                if polished is not None:
                    return polished, True
            logger.debug(f"{method}: no KKT finish ({result.message})")
            succeeded |= bool(result.success)
            if self.feasible(x, 1e-8) and self.value(x) < self.value(best):
                best = x
        return best, succeeded


def _weak_feasible(x: np.ndarray, k: int, c: float) -> np.ndarray:
    """Rescale x = (w, a, b) so sum w = 1 and sum(a, b) <= c hold exactly"""
    w, tail = x[:k], x[k:]
    w = w / w.sum() if w.sum() > 0 else np.full(k, 1.0 / k)
    total = tail.sum()
    if total > c:
        tail = tail * (c / total)
    return np.concatenate((w, tail))


# ---------------------------------------------------------------------------
# Exact compatibility constants
# ---------------------------------------------------------------------------

def _check_enumerable(support: Tuple[int, ...]):
    if len(support) > Config.CONE_MAX_SUPPORT:
        raise EnumerationLimitError(
            f"|J| = {len(support)} exceeds the enumeration limit {Config.CONE_MAX_SUPPORT}; "
            f"use cone_sample_min for an upper bound"
        )


def _sign_patterns(size: int):
    # v and -v give the same ratio, so the first sign is fixed
    for tail in itertools.product((1.0, -1.0), repeat=size - 1):
        yield np.array((1.0,) + tail)


def _pattern_map(p: int, support: Tuple[int, ...], complement: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """T with v = T x for x = (w, a, b): v_J = s * w, v_Jc = a - b"""
    k, q = len(support), complement.size
    T = np.zeros((p, k + 2 * q))
    T[list(support), np.arange(k)] = signs
    T[complement, k + np.arange(q)] = 1.0
    T[complement, k + q + np.arange(q)] = -1.0
    return T


def _enumerate(M, J, c, kind: ConeKind) -> ConeConstantReport:
    M = symmetric_psd(M, 'M')
    p = M.shape[0]
    support, complement = _support(J, p)
    if c <= 0:
        raise ValueError(f"c must be > 0, got {c}")
    if not support:
        return ConeConstantReport(float('inf'), kind, (), c, Certification.EXACT_ENUMERATION, None, 0)
    _check_enumerable(support)

    k, q = len(support), complement.size
    tol = Config.CONE_SUBPROBLEM_TOL
    max_iter = Config.CONE_SUBPROBLEM_MAX_ITER
    best_value, best_witness = float('inf'), None
    all_converged = True
    count = 0

    for signs in _sign_patterns(k):
        count += 1
        T = _pattern_map(p, support, complement, signs)
        Q = T.T @ M @ T
        Q = (Q + Q.T) / 2.0
        if kind is ConeKind.COMPATIBILITY:
            d = np.concatenate((np.full(k, float(c)), -np.ones(2 * q)))
            qp = _PatternQP(Q, d, [1.0], [np.inf])
            x0 = np.concatenate((np.full(k, 1.0 / (c * k)), np.zeros(2 * q)))
        else:
            e_w = np.concatenate((np.ones(k), np.zeros(2 * q)))
            e_c = np.concatenate((np.zeros(k), np.ones(2 * q)))
            if q:
                qp = _PatternQP(Q, np.vstack((e_w, e_c)), [1.0, -np.inf], [1.0, float(c)])
            else:
                qp = _PatternQP(Q, e_w, [1.0], [1.0])
            x0 = np.concatenate((np.full(k, 1.0 / k), np.zeros(2 * q)))

        x, converged = qp.solve(x0, tol, max_iter)
        if kind is ConeKind.WEAK_COMPATIBILITY:
            x = _weak_feasible(x, k, c)
        all_converged &= converged
        witness = T @ x
        value = cone_ratio(M, support, c, kind, witness)
        if value < best_value:
            best_value, best_witness = value, witness

    if not all_converged:
        logger.warning(f"{kind.value}(J={list(support)}, c={c}): a subproblem did not reach stationarity")
    certification = Certification.EXACT_ENUMERATION if all_converged else Certification.HEURISTIC_UPPER
    return ConeConstantReport(best_value, kind, support, float(c), certification, best_witness, count)


def compatibility(M, J: Sequence[int], c: float) -> ConeConstantReport:
    """Compatibility constant kappa_M(J, c) by sign-pattern enumeration"""
    return _enumerate(M, J, c, ConeKind.COMPATIBILITY)


def weak_compatibility(M, J: Sequence[int], c: float) -> ConeConstantReport:
    """Weak compatibility constant kappa_bar_M(J, c) by sign-pattern enumeration"""
    return _enumerate(M, J, c, ConeKind.WEAK_COMPATIBILITY)


# ---------------------------------------------------------------------------
# Restricted eigenvalue (heuristic)
# ---------------------------------------------------------------------------

def _re_feasible(v: np.ndarray, idx: List[int], complement: np.ndarray, c: float) -> Optional[np.ndarray]:
    """Scale to ||v_J||_2 = 1 and pull v_Jc into the l1 ball of radius c ||v_J||_1"""
    norm_J = float(np.linalg.norm(v[idx]))
    if norm_J == 0:
        return None
    v = v / norm_J
    v[complement] = _project_l1_ball(v[complement], c * float(np.abs(v[idx]).sum()))
    return v


def _re_descent(M: np.ndarray, v: np.ndarray, idx: List[int], complement: np.ndarray, c: float,
                max_iter: int = 500) -> Tuple[np.ndarray, float]:
    value = float(v @ M @ v)
    step = 1.0 / max(2.0 * float(np.linalg.eigvalsh(M)[-1]), 1e-300)
    for _ in range(max_iter):
        improved = False
        previous = value
        while step > 1e-14:
            candidate = _re_feasible(v - step * 2.0 * (M @ v), idx, complement, c)
            if candidate is not None:
                candidate_value = float(candidate @ M @ candidate)
                if candidate_value < value - 1e-15 * (1.0 + abs(value)):
                    v, value = candidate, candidate_value
                    step *= 2.0
                    improved = True
                    break
            step /= 2.0
        if not improved or previous - value <= 1e-12 * max(abs(value), 1e-300):
            break
    return v, value


def restricted_eigenvalue(M, J: Sequence[int], c: float, starts: Optional[int] = None,
                          seed: int = 0) -> ConeConstantReport:
    """
    Best found min v'Mv over {||v_J||_2 = 1, ||v_Jc||_1 <= c ||v_J||_1}.

    Starts from the weak-compatibility witness when |J| <= CONE_MAX_SUPPORT (so
    the result never exceeds kappa_bar; larger supports are reported as
    heuristic_unanchored), the coordinate directions of J, the bottom
    eigenvector of M_JJ and `starts` random points.
    """
    M = symmetric_psd(M, 'M')
    p = M.shape[0]
    support, complement = _support(J, p)
    starts = Config.RE_STARTS if starts is None else starts
    if not support:
        return ConeConstantReport(float('inf'), ConeKind.RESTRICTED_EIGENVALUE, (), c,
                                  Certification.HEURISTIC_UPPER, None, 0)
    idx = list(support)

    initial = []
    anchored = len(support) <= Config.CONE_MAX_SUPPORT
    if anchored:
        initial.append(weak_compatibility(M, support, c).witness)
    else:
        logger.info(f"restricted_eigenvalue(J={idx}): |J| > {Config.CONE_MAX_SUPPORT}, no weak-compatibility start")
    for j in idx:
        e = np.zeros(p)
        e[j] = 1.0
        initial.append(e)
    bottom = np.zeros(p)
    bottom[idx] = np.linalg.eigh(M[np.ix_(idx, idx)])[1][:, 0]
    initial.append(bottom)
    rng = np.random.default_rng(seed)
    for _ in range(starts):
        initial.append(rng.standard_normal(p))

    best_value, best_witness = float('inf'), None
    for v0 in initial:
        v = _re_feasible(np.array(v0, dtype=float), idx, complement, c)
        if v is None:
            continue
        v, value = _re_descent(M, v, idx, complement, c)
        if value < best_value:
            best_value, best_witness = value, v
    certification = Certification.HEURISTIC_UPPER if anchored else Certification.HEURISTIC_UNANCHORED
    return ConeConstantReport(max(best_value, 0.0), ConeKind.RESTRICTED_EIGENVALUE, support, float(c),
                              certification, best_witness, len(initial))


def _informed_supports(M: np.ndarray, s: int) -> List[Tuple[int, ...]]:
    """Supports built from the bottom eigenvectors and the smallest diagonal entries"""
    eigenvectors = np.linalg.eigh(M)[1]
    supports = []
    for col in range(min(3, M.shape[0])):
        top = np.argsort(-np.abs(eigenvectors[:, col]), kind='stable')[:s]
        supports.append(tuple(sorted(int(j) for j in top)))
    smallest = np.argsort(np.diag(M), kind='stable')[:s]
    supports.append(tuple(sorted(int(j) for j in smallest)))
    return supports


def restricted_eigenvalue_over_supports(M, s: int, c: float, starts: Optional[int] = None, seed: int = 0,
                                        extra_supports: Sequence[Sequence[int]] = ()) -> ConeConstantReport:
    """
    min over |J| <= s of restricted_eigenvalue(M, J, c).

    Every support is enumerated when p <= 20 and s <= 3; otherwise a sample
    of size-s supports (plus spectrally informed ones and `extra_supports`)
    is searched and the report is marked non-exhaustive.
    """
    M = symmetric_psd(M, 'M')
    p = M.shape[0]
    if not 1 <= s <= p:
        raise ValueError(f"s must be in [1, p], got {s}")

    exhaustive = p <= RE_ENUMERATION_MAX_P and s <= RE_ENUMERATION_MAX_S
    if exhaustive:
        supports = [J for size in range(1, s + 1) for J in itertools.combinations(range(p), size)]
    else:
        supports = _informed_supports(M, s)
        supports.extend(tuple(sorted(int(j) for j in J)) for J in extra_supports)
        rng = np.random.default_rng(seed)
        for _ in range(Config.RE_SUPPORT_SAMPLES):
            supports.append(tuple(sorted(int(j) for j in rng.choice(p, size=s, replace=False))))
        supports = list(dict.fromkeys(supports))

    best, unanchored = None, False
    for J in supports:
        report = restricted_eigenvalue(M, J, c, starts=starts, seed=seed)
        unanchored |= report.certification is Certification.HEURISTIC_UNANCHORED
        if best is None or report.value < best.value:
            best = report
    certification = Certification.HEURISTIC_UNANCHORED if unanchored else Certification.HEURISTIC_UPPER
    return ConeConstantReport(best.value, ConeKind.RESTRICTED_EIGENVALUE, best.J, float(c),
                              certification, best.witness, len(supports), exhaustive)


# ---------------------------------------------------------------------------
# Sampling oracle
# ---------------------------------------------------------------------------

def _sample_chunk(rng: np.random.Generator, size: int, p: int, idx: List[int], complement: np.ndarray,
                  c: float) -> np.ndarray:
    k, q = len(idx), complement.size
    head = rng.standard_normal((size, k))
    keep = rng.random((size, k)) >= 0.25
    keep[~keep.any(axis=1), 0] = True
    head *= keep
    V = np.zeros((size, p))
    V[:, idx] = head
    if q:
        tail = rng.standard_normal((size, q)) * (rng.random((size, q)) >= 0.5)
        radius = c * np.abs(head).sum(axis=1) * rng.random(size)
        norms = np.abs(tail).sum(axis=1)
        scale = np.divide(radius, norms, out=np.zeros(size), where=norms > 0)
        V[:, complement] = tail * scale[:, None]
    return V


def cone_sample_min(M, J: Sequence[int], c: float, kind: ConeKind, samples: int, seed: int = 0) -> float:
    """
    Minimum of the defining ratio over `samples` random cone points.

    Chunk i is drawn from its own stream seeded by (seed, i), so the first
    k samples do not depend on the total requested.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    M = np.asarray(M, dtype=float)
    p = M.shape[0]
    support, complement = _support(J, p)
    if not support:
        return float('inf')
    kind = ConeKind(kind)
    idx = list(support)
    best = float('inf')
    chunk = 0
    remaining = samples
    while remaining > 0:
        rng = np.random.default_rng([seed, chunk])
        V = _sample_chunk(rng, SAMPLE_CHUNK, p, idx, complement, c)[:remaining]
        quad = np.maximum(np.einsum('ij,jk,ik->i', V, M, V), 0.0)
        l1_J = np.abs(V[:, idx]).sum(axis=1)
        if kind is ConeKind.COMPATIBILITY:
            gap = c * l1_J - np.abs(V[:, complement]).sum(axis=1)
            ok = gap > 0
            ratios = np.full(V.shape[0], np.inf)
            ratios[ok] = c * c * len(idx) * quad[ok] / gap[ok] ** 2
        elif kind is ConeKind.WEAK_COMPATIBILITY:
            ratios = len(idx) * quad / l1_J ** 2
        else:
            ratios = quad / np.einsum('ij,ij->i', V[:, idx], V[:, idx])
        best = min(best, float(np.min(ratios)))
        remaining -= V.shape[0]
        chunk += 1
    return best


# ---------------------------------------------------------------------------
# Concentration thresholds
# ---------------------------------------------------------------------------

def sup_norm_deviation_threshold(p: int, N: int, B_X: float, delta: float) -> float:
    """t with P(||Sigma - Sigma_hat_N||_inf >= t) <= delta (Hoeffding plus union bound)"""
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    return B_X ** 2 * sqrt(log(2 * p * p / delta) / (2 * N))


def lambda_min_validity(p: int, N: int, B_X: float, sigma_inv_norm: float, delta: float) -> bool:
    """2 B_X^2 p ||Sigma^-1|| log(p/delta) <= N"""
    return 2 * B_X ** 2 * p * sigma_inv_norm * log(p / delta) <= N


def lambda_min_threshold(p: int, N: int, B_X: float, sigma_inv_norm: float, delta: float) -> float:
    """
    High-probability lower bound on lambda_min(Sigma^-1/2 Sigma_hat_N Sigma^-1/2):
    1 - sqrt(2 B_X^2 p ||Sigma^-1|| log(p/delta) / N).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if not lambda_min_validity(p, N, B_X, sigma_inv_norm, delta):
        raise ConditionViolationError(
            f"lambda_min bound needs 2 B_X^2 p ||Sigma^-1|| log(p/delta) <= N "
            f"(p={p}, N={N}, B_X={B_X}, ||Sigma^-1||={sigma_inv_norm}, delta={delta})"
        )
    return 1.0 - sqrt(2 * B_X ** 2 * p * sigma_inv_norm * log(p / delta) / N)
