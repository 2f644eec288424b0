"""
Dataset and second-moment matrix types
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from errors import DimensionMismatchError, DatasetFormatError
from utils.linalg import symmetric_psd, freeze


class Scope(str, Enum):
    """Sample scope a second-moment matrix is averaged over"""
    LABELED = "labeled"
    UNLABELED = "unlabeled"
    ALL = "all"
    POPULATION = "population"


@dataclass(frozen=True)
class Bounds:
    """Almost-sure bounds |X_ij| <= B_X and |Y_i| <= B_Y"""
    B_X: float
    B_Y: float

    def __post_init__(self):
        if self.B_X < 0 or self.B_Y < 0:
            raise ValueError(f"Bounds must be nonnegative, got B_X={self.B_X}, B_Y={self.B_Y}")

    def to_dict(self):
        return {'B_X': float(self.B_X), 'B_Y': float(self.B_Y)}


@dataclass(frozen=True, eq=False)
class NormalizationTransform:
    """
    Affine map applied by center_scale: x' = (x - feature_mean) / feature_scale,
    y' = y - label_mean. Labels are centered only, never rescaled.
    """
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    label_mean: float
    labels_scaled: bool = False

    def then(self, other: "NormalizationTransform") -> "NormalizationTransform":
        """Composition: apply self first, then other"""
        return NormalizationTransform(
            feature_mean=freeze(self.feature_mean + self.feature_scale * other.feature_mean),
            feature_scale=freeze(self.feature_scale * other.feature_scale),
            label_mean=self.label_mean + other.label_mean,
        )

    def to_dict(self):
        return {
            'feature_mean': [float(v) for v in self.feature_mean],
            'feature_scale': [float(v) for v in self.feature_scale],
            'label_mean': float(self.label_mean),
            'labels_scaled': self.labels_scaled,
        }


@dataclass(frozen=True, eq=False)
class PartiallyLabeledDataset:
    """N x p features, the first n of which carry labels"""

    features: np.ndarray
    labels: np.ndarray
    bounds: Optional[Bounds] = None
    bounds_inferred: bool = False
    feature_names: Tuple[str, ...] = ()
    transform: Optional[NormalizationTransform] = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        Y = np.array(self.labels, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DimensionMismatchError(f"features must be an N x p matrix, got shape {X.shape}")
        N, p = X.shape
        if p < 1:
            raise DimensionMismatchError("features need at least one column")
        if not 1 <= Y.shape[0] <= N:
            raise DatasetFormatError(f"need 1 <= n <= N, got n={Y.shape[0]}, N={N}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DatasetFormatError("features and labels must be finite")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DimensionMismatchError(f"{len(names)} feature names for {p} columns")
        if self.bounds is not None:
            # relative slack for values read back from text
            slack = 1e-12
            if np.max(np.abs(X)) > self.bounds.B_X * (1 + slack) + slack:
                raise DatasetFormatError(f"a feature exceeds B_X = {self.bounds.B_X}")
            if np.max(np.abs(Y)) > self.bounds.B_Y * (1 + slack) + slack:
                raise DatasetFormatError(f"a label exceeds B_Y = {self.bounds.B_Y}")
        object.__setattr__(self, 'features', freeze(X))
        object.__setattr__(self, 'labels', freeze(Y))
        object.__setattr__(self, 'feature_names', names)

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def m(self) -> int:
        return self.N - self.n

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def n_star(self) -> int:
        return min(self.n, self.m)

    @property
    def labeled_features(self) -> np.ndarray:
        return self.features[:self.n]

    @property
    def unlabeled_features(self) -> np.ndarray:
        return self.features[self.n:]

    def with_bounds(self, bounds: Optional[Bounds], inferred: bool = False) -> "PartiallyLabeledDataset":
        return PartiallyLabeledDataset(
            features=self.features, labels=self.labels, bounds=bounds,
            bounds_inferred=inferred, feature_names=self.feature_names, transform=self.transform,
        )

    def summary(self):
        """Shape and bounds block used in reports"""
        return {
            'n': self.n,
            'm': self.m,
            'N': self.N,
            'p': self.p,
            'bounds': self.bounds.to_dict() if self.bounds else None,
            'bounds_inferred': self.bounds_inferred,
            'transform': self.transform.to_dict() if self.transform else None,
        }

    def __repr__(self):
        return f"<PartiallyLabeledDataset(n={self.n}, N={self.N}, p={self.p})>"


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric PSD second-moment matrix tagged with its scope"""

    matrix: np.ndarray
    scope: Scope

    def __post_init__(self):
        M = symmetric_psd(self.matrix, f"{Scope(self.scope).value} Gram matrix")
        object.__setattr__(self, 'matrix', freeze(M))
        object.__setattr__(self, 'scope', Scope(self.scope))

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def spectral_norm(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[-1])

    def inverse_norm(self) -> float:
        """||M^{-1}|| = 1 / lambda_min(M); +inf when singular"""
        smallest = float(np.linalg.eigvalsh(self.matrix)[0])
        return float('inf') if smallest <= 0 else 1.0 / smallest

    def __repr__(self):
        return f"<GramMatrix(scope='{self.scope.value}', p={self.p})>"
