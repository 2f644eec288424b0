"""
Typed errors raised across the library
"""

from typing import Optional


class SSLassoError(Exception):
    """Base class for every error raised on purpose by this package"""


class DatasetFormatError(SSLassoError, ValueError):
    """Malformed dataset file: bad numeric field, ragged row, label ordering"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConstantColumnError(SSLassoError, ValueError):
    """Feature column with zero empirical variance"""

    def __init__(self, column: str):
        super().__init__(f"Feature column '{column}' is constant (zero variance)")
        self.column = column

    def __reduce__(self):
        return (type(self), (self.column,))


class ScopeError(SSLassoError, ValueError):
    """Requested sample scope is empty (e.g. no unlabeled rows)"""


class NotSymmetricError(SSLassoError, ValueError):
    """Matrix expected symmetric (and PSD) is not"""


class DimensionMismatchError(SSLassoError, ValueError):
    """Vector or matrix shapes do not agree"""


class UnboundedProblemError(SSLassoError, ValueError):
    """Penalized quadratic with G_jj = 0 and |b_j| > lambda has no minimizer"""

    def __init__(self, coordinate: int, b_value: float, lam: float):
        super().__init__(
            f"Objective unbounded below along coordinate {coordinate}: "
            f"G_jj = 0 and |b_j| = {abs(b_value):.12g} > lambda = {lam:.12g}"
        )
        self.coordinate = coordinate
        self.b_value = b_value
        self.lam = lam

    def __reduce__(self):
        return (type(self), (self.coordinate, self.b_value, self.lam))


class EnumerationLimitError(SSLassoError, ValueError):
    """Support too large for sign-pattern enumeration"""


class ConditionViolationError(SSLassoError, ValueError):
    """A formula or theorem was requested outside of its validity conditions"""


class ExperimentConfigError(SSLassoError, ValueError):
    """Invalid experiment configuration (unknown key, bad value)"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class InvalidTrialError(SSLassoError, RuntimeError):
    """A Monte Carlo trial could not be certified (solver did not converge)"""

    def __init__(self, seed: int, trial_index: int, reason: str):
        super().__init__(
            f"Trial {trial_index} (seed {seed}) is invalid: {reason}"
        )
        self.seed = seed
        self.trial_index = trial_index
        self.reason = reason

    def __reduce__(self):
        # worker processes send it back pickled
        return (type(self), (self.seed, self.trial_index, self.reason))


class UsageError(SSLassoError, ValueError):
    """Malformed command line"""
