"""
Small dense linear-algebra checks shared by the domain types
"""

import numpy as np

from errors import NotSymmetricError, DimensionMismatchError

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10


def as_square(matrix, name: str = 'matrix') -> np.ndarray:
    """Return a float copy of `matrix`, checking it is square"""
    M = np.array(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {M.shape}")
    return M


def check_symmetric(M: np.ndarray, name: str = 'matrix', rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """
    Check symmetry within `rtol` (relative to the largest entry) and return
    the exactly symmetrized matrix.
    """
    scale = max(float(np.max(np.abs(M))) if M.size else 0.0, np.finfo(float).tiny)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > rtol * scale:
        raise NotSymmetricError(f"{name} is not symmetric (max |M - M^T| = {asym:.3e})")
    return (M + M.T) / 2.0


def check_psd(M: np.ndarray, name: str = 'matrix', rtol: float = PSD_RTOL) -> None:
    """Require every eigenvalue >= -rtol * largest eigenvalue"""
    if M.size == 0:
        return
    eigenvalues = np.linalg.eigvalsh(M)
    top = max(float(eigenvalues[-1]), 0.0)
    if float(eigenvalues[0]) < -rtol * max(top, 1e-300):
        raise NotSymmetricError(
            f"{name} is not positive semidefinite (smallest eigenvalue {eigenvalues[0]:.3e})"
        )


def symmetric_psd(matrix, name: str = 'matrix') -> np.ndarray:
    """Validate and return a symmetric PSD float matrix"""
    M = check_symmetric(as_square(matrix, name), name)
    check_psd(M, name)
    return M


def freeze(array: np.ndarray) -> np.ndarray:
    """Mark an array read-only so dataclass values stay immutable"""
    array.setflags(write=False)
    return array
