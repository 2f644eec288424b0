"""
Report types: cone constants, trials, coverage campaigns, paired comparisons
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np


class ConeKind(str, Enum):
    """Which cone constant a report holds"""
    COMPATIBILITY = "compatibility"
    WEAK_COMPATIBILITY = "weak_compatibility"
    RESTRICTED_EIGENVALUE = "restricted_eigenvalue"


class Certification(str, Enum):
    """How much a reported cone constant can be trusted"""
    EXACT_ENUMERATION = "exact_enumeration"  # every sign-pattern subproblem solved
    HEURISTIC_UPPER = "heuristic_upper"      # local search, value >= true infimum
    SAMPLED_UPPER = "sampled_upper"          # random cone points, value >= true infimum
    # restricted eigenvalue on a support too large for the weak-compatibility start;
    # value >= true infimum but not held below kappa_bar
    HEURISTIC_UNANCHORED = "heuristic_unanchored"


@dataclass(frozen=True, eq=False)
class ConeConstantReport:
    value: float
    kind: ConeKind
    J: Tuple[int, ...]
    c: float
    certification: Certification
    witness: Optional[np.ndarray]
    subproblems: int = 0
    exhaustive: bool = True

    def to_dict(self):
        return {
            'value': float(self.value),
            'kind': self.kind.value,
            'J': [int(j) for j in self.J],
            'c': float(self.c),
            'certification': self.certification.value,
            'witness': None if self.witness is None else [float(v) for v in self.witness],
            'subproblems': self.subproblems,
            'exhaustive': self.exhaustive,
        }


@dataclass(frozen=True)
class BoundCheck:
    """One inequality evaluated inside a trial"""
    value: float
    bound: float
    holds: bool
    deterministic: bool = False

    def to_dict(self):
        return {
            'value': float(self.value),
            'bound': float(self.bound),
            'holds': bool(self.holds),
            'deterministic': self.deterministic,
        }


@dataclass(frozen=True, eq=False)
class TrialReport:
    trial_index: int
    seed: int
    theorem: str
    variant: str
    lam: float
    excess_risk: float
    transductive_risk: Optional[float]
    risk: float
    rhs_bound: float
    covered: bool
    kkt_residual: float
    sweeps: int
    valid: bool
    candidate_beta: Tuple[float, ...]
    candidate_J: Tuple[int, ...]
    cone_constant_used: Optional[float]
    rhs_certified: bool = True
    excess_risk_stderr: float = 0.0
    l1_norm: float = 0.0
    diagnostics: Dict[str, BoundCheck] = field(default_factory=dict)
    tail_term_proof: Optional[float] = None

    def to_dict(self):
        return {
            'trial_index': self.trial_index,
            'seed': self.seed,
            'theorem': self.theorem,
            'variant': self.variant,
            'lambda': float(self.lam),
            'excess_risk': float(self.excess_risk),
            'excess_risk_stderr': float(self.excess_risk_stderr),
            'transductive_risk': None if self.transductive_risk is None else float(self.transductive_risk),
            'risk': float(self.risk),
            'rhs_bound': float(self.rhs_bound),
            'covered': bool(self.covered),
            'kkt_residual': float(self.kkt_residual),
            'sweeps': self.sweeps,
            'valid': self.valid,
            'l1_norm': float(self.l1_norm),
            'candidate_used': {
                'beta': [float(v) for v in self.candidate_beta],
                'J': [int(j) for j in self.candidate_J],
            },
            'cone_constant_used': None if self.cone_constant_used is None else float(self.cone_constant_used),
            'rhs_certified': self.rhs_certified,
            'tail_term_proof': None if self.tail_term_proof is None else float(self.tail_term_proof),
            'diagnostics': {name: check.to_dict() for name, check in sorted(self.diagnostics.items())},
        }

    def to_row(self):
        """Flat row for CSV export"""
        row = {
            'trial_index': self.trial_index,
            'seed': self.seed,
            'theorem': self.theorem,
            'variant': self.variant,
            'lambda': self.lam,
            'excess_risk': self.excess_risk,
            'transductive_risk': self.transductive_risk,
            'risk': self.risk,
            'rhs_bound': self.rhs_bound,
            'covered': self.covered,
            'kkt_residual': self.kkt_residual,
            'sweeps': self.sweeps,
            'l1_norm': self.l1_norm,
            'cone_constant_used': self.cone_constant_used,
            'candidate_J': ' '.join(str(j) for j in self.candidate_J),
        }
        for name, check in sorted(self.diagnostics.items()):
            row[f'diag_{name}_holds'] = check.holds
        return row


@dataclass(frozen=True)
class DiagnosticSummary:
    trials: int
    coverage: float
    deterministic: bool
    passed: bool

    def to_dict(self):
        return {
            'trials': self.trials,
            'coverage': float(self.coverage),
            'deterministic': self.deterministic,
            'passed': self.passed,
        }


@dataclass(frozen=True)
class ExpectationCheck:
    """Sample mean of the excess risk against an expectation bound"""
    mean_excess_risk: float
    standard_error: float
    rhs: float
    passed: bool

    def to_dict(self):
        return {
            'mean_excess_risk': float(self.mean_excess_risk),
            'standard_error': float(self.standard_error),
            'rhs': float(self.rhs),
            'passed': self.passed,
        }


@dataclass(frozen=True, eq=False)
class CoverageReport:
    theorem: str
    master_seed: int
    trials: int
    coverage: float
    delta: float
    slack: float
    passed: bool
    seeds: Tuple[int, ...]
    diagnostics: Dict[str, DiagnosticSummary] = field(default_factory=dict)
    expectation: Optional[ExpectationCheck] = None
    trial_reports: Tuple[TrialReport, ...] = field(default=(), repr=False)

    @property
    def coverage_passed(self) -> bool:
        return self.coverage >= 1.0 - self.delta - self.slack

    def to_dict(self, include_trials: bool = False):
        payload = {
            'theorem': self.theorem,
            'master_seed': self.master_seed,
            'trials': self.trials,
            'coverage': float(self.coverage),
            'delta': float(self.delta),
            'slack': float(self.slack),
            'coverage_passed': self.coverage_passed,
            'pass': self.passed,
            'seeds': list(self.seeds),
            'diagnostics': {name: s.to_dict() for name, s in sorted(self.diagnostics.items())},
            'expectation': self.expectation.to_dict() if self.expectation else None,
        }
        if include_trials:
            payload['trial_reports'] = [t.to_dict() for t in self.trial_reports]
        return payload


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Paired excess risks of two estimator variants on the same datasets"""
    variants: Tuple[str, str]
    master_seed: int
    trials: int
    medians: Tuple[float, float]
    win_fraction: float
    passed: bool
    rows: Tuple[dict, ...] = field(default=(), repr=False)

    def to_dict(self):
        return {
            'variants': list(self.variants),
            'master_seed': self.master_seed,
            'trials': self.trials,
            'medians': {self.variants[0]: float(self.medians[0]), self.variants[1]: float(self.medians[1])},
            'win_fraction': float(self.win_fraction),
            'pass': self.passed,
        }
