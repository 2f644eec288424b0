"""
Dataset ingestion, normalization and empirical second-moment matrices
"""

import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from errors import DatasetFormatError, ConstantColumnError, ScopeError
from models.dataset import Bounds, NormalizationTransform, PartiallyLabeledDataset, GramMatrix, Scope
from utils.linalg import freeze

logger = logging.getLogger(__name__)

LABEL_COLUMN = 'y'


def load_dataset(path: str, bounds: Optional[Bounds] = None) -> PartiallyLabeledDataset:
    """
    Read a dataset CSV with header "x1,...,xp,y".

    Unlabeled rows leave the y field empty and must come after every
    labeled row.

    Args:
        path: CSV file path
        bounds: optional user-supplied (B_X, B_Y)

    Returns:
        PartiallyLabeledDataset with n = number of labeled rows
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Dataset file not found: {path}")

    try:
        frame = pd.read_csv(
            path, header=0, dtype=str, keep_default_na=False,
            skip_blank_lines=True, encoding='utf-8',
        )
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"Inconsistent column count in {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError(f"Empty dataset file: {path}") from e

    if not isinstance(frame.index, pd.RangeIndex):
        # pandas promotes the first column to an index when every row has one extra field
        raise DatasetFormatError(f"Inconsistent column count in {path}: rows are wider than the header")

    columns = [str(c).strip() for c in frame.columns]
    if len(columns) < 2 or columns[-1] != LABEL_COLUMN:
        raise DatasetFormatError(f"Header must be 'x1,...,xp,y', got {','.join(columns)}")
    if frame.empty:
        raise DatasetFormatError(f"Dataset {path} has no rows")

    # Short rows are padded with NaN by the parser even with keep_default_na off
    ragged = frame.isna().any(axis=1).to_numpy()
    if ragged.any():
        row = int(np.flatnonzero(ragged)[0]) + 1
        raise DatasetFormatError(f"Inconsistent column count at row {row}", row=row)

    feature_columns = columns[:-1]
    features = np.empty((len(frame), len(feature_columns)))
    for j, column in enumerate(feature_columns):
        features[:, j] = _parse_column(frame.iloc[:, j], column)

    raw_labels = frame.iloc[:, -1].str.strip()
    labeled = (raw_labels != '').to_numpy()
    n = int(labeled.sum())
    if n == 0:
        raise DatasetFormatError(f"Dataset {path} has no labeled rows")
    if not labeled[:n].all():
        row = int(np.flatnonzero(~labeled)[0]) + 1
        raise DatasetFormatError(
            f"Labeled row after unlabeled row {row}: labeled rows must come first", row=row, column=LABEL_COLUMN
        )
    labels = _parse_column(raw_labels.iloc[:n], LABEL_COLUMN)

    dataset = PartiallyLabeledDataset(
        features=features, labels=labels, bounds=bounds, feature_names=tuple(feature_columns)
    )
    logger.info(f"Loaded {path}: n={dataset.n}, N={dataset.N}, p={dataset.p}")
    return dataset


def _parse_column(values: pd.Series, column: str) -> np.ndarray:
    parsed = pd.to_numeric(values.str.strip(), errors='coerce')
    bad = parsed.isna().to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0]) + 1
        raise DatasetFormatError(
            f"Malformed numeric field at row {row}, column '{column}': {values.iloc[row - 1]!r}",
            row=row, column=column,
        )
    return parsed.to_numpy(dtype=float)


def infer_bounds(d: PartiallyLabeledDataset) -> PartiallyLabeledDataset:
    """Attach empirical max-abs bounds, flagged as inferred"""
    bounds = Bounds(B_X=float(np.max(np.abs(d.features))), B_Y=float(np.max(np.abs(d.labels))))
    logger.warning(
        f"Using inferred bounds B_X={bounds.B_X:.6g}, B_Y={bounds.B_Y:.6g}; "
        f"the risk bounds assume population bounds"
    )
    return d.with_bounds(bounds, inferred=True)


def center_scale(d: PartiallyLabeledDataset) -> PartiallyLabeledDataset:
    """
    Center and scale every feature over all N rows (mean 0, mean-square 1)
    and center the labels over the labeled rows.

    The applied affine map is composed into `transform` on the result.
    Bounds are dropped since they no longer describe the data.
    """
    X = d.features
    mean = X.mean(axis=0)
    centered = X - mean
    scale = np.sqrt(np.mean(centered ** 2, axis=0))
    for j, s in enumerate(scale):
        if not s > 1e-14 * max(1.0, abs(mean[j])):
            raise ConstantColumnError(d.feature_names[j])
    label_mean = float(d.labels.mean())

    step = NormalizationTransform(
        feature_mean=freeze(mean), feature_scale=freeze(scale), label_mean=label_mean
    )
    transform = d.transform.then(step) if d.transform is not None else step
    return PartiallyLabeledDataset(
        features=centered / scale,
        labels=d.labels - label_mean,
        feature_names=d.feature_names,
        transform=transform,
    )


def _scope_rows(d: PartiallyLabeledDataset, scope: Scope) -> np.ndarray:
    scope = Scope(scope)
    if scope is Scope.LABELED:
        return d.labeled_features
    if scope is Scope.UNLABELED:
        if d.m == 0:
            raise ScopeError("Unlabeled scope is empty (N = n)")
        return d.unlabeled_features
    if scope is Scope.ALL:
        return d.features
    raise ScopeError(f"Scope '{scope.value}' is not an empirical scope")


def gram(d: PartiallyLabeledDataset, scope: Scope) -> GramMatrix:
    """Average of X_i X_i' over the rows of `scope`"""
    rows = _scope_rows(d, scope)
    matrix = rows.T @ rows / rows.shape[0]
    return GramMatrix(matrix=(matrix + matrix.T) / 2.0, scope=scope)


def labeled_moment(d: PartiallyLabeledDataset) -> np.ndarray:
    """b = (1/n) X_lab' Y"""
    return d.labeled_features.T @ d.labels / d.n
