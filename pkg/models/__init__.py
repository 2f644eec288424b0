"""
Domain types and database models
"""

from .dataset import Scope, Bounds, NormalizationTransform, PartiallyLabeledDataset, GramMatrix
from .problem import PenalizedQuadraticProblem, Solution
from .estimator import EstimatorVariant, FitResult
from .model_spec import NonlinearityKind, Nonlinearity, DesignSpec, ModelSpec
from .reports import (
    ConeKind, Certification, ConeConstantReport, BoundCheck, TrialReport,
    DiagnosticSummary, ExpectationCheck, CoverageReport, ComparisonReport,
)
from .experiment import Theorem, ExperimentConfig
from .campaign_record import Base, CampaignRecord, TrialRecord

__all__ = [
    'Scope', 'Bounds', 'NormalizationTransform', 'PartiallyLabeledDataset', 'GramMatrix',
    'PenalizedQuadraticProblem', 'Solution',
    'EstimatorVariant', 'FitResult',
    'NonlinearityKind', 'Nonlinearity', 'DesignSpec', 'ModelSpec',
    'ConeKind', 'Certification', 'ConeConstantReport', 'BoundCheck', 'TrialReport',
    'DiagnosticSummary', 'ExpectationCheck', 'CoverageReport', 'ComparisonReport',
    'Theorem', 'ExperimentConfig',
    'Base', 'CampaignRecord', 'TrialRecord',
]
