"""
JSON and CSV output: stable formatting, write-then-rename
"""

import json
import logging
import math
import os
import tempfile
from enum import Enum
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value):
    """
    Convert numpy types, enums and tuples into plain JSON values.

    Non-finite floats become the strings "inf", "-inf" and "nan" so the
    output stays strict JSON.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


def dumps(payload) -> str:
    """Deterministic JSON text: sorted keys, 2-space indent, shortest round-trip floats"""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)


def _atomic_write(path: str, write) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            write(handle)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_json(path: str, payload) -> None:
    """Write `payload` as JSON; the target is either complete or untouched"""
    text = dumps(payload) + '\n'
    _atomic_write(path, lambda handle: handle.write(text))
    logger.info(f"Wrote {path}")


def row_columns(rows: Sequence[dict], leading: Optional[Iterable[str]] = None) -> List[str]:
    """Column order: `leading`, then the first row's keys, then any others sorted"""
    columns = list(leading or [])
    for key in (rows[0].keys() if rows else []):
        if key not in columns:
            columns.append(key)
    extra = sorted({key for row in rows for key in row} - set(columns))
    return columns + extra


def write_csv(path: str, rows: Sequence[dict], leading: Optional[Iterable[str]] = None) -> None:
    """Write rows with a stable column order; missing cells stay empty"""
    frame = pd.DataFrame(list(rows), columns=row_columns(rows, leading))
    _atomic_write(path, lambda handle: frame.to_csv(handle, index=False, float_format='%.17g'))
    logger.info(f"Wrote {len(frame)} rows to {path}")
