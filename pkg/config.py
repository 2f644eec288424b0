"""
Application configuration - Loads from environment variables
"""

import os
import sys
import logging
from dotenv import load_dotenv

# Load .env file if exists
load_dotenv()


def _getenv_bool(name: str, default: str = 'false') -> bool:
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Application configuration"""

    # Solver
    SOLVER_TOL = float(os.getenv('SSLASSO_SOLVER_TOL', '1e-8'))
    SOLVER_MAX_SWEEPS = int(os.getenv('SSLASSO_SOLVER_MAX_SWEEPS', '100000'))

    # Spectral cutoff for pseudo-inverses and range projectors
    RANK_TOL = float(os.getenv('SSLASSO_RANK_TOL', '1e-10'))

    # Cone constants
    CONE_MAX_SUPPORT = int(os.getenv('SSLASSO_CONE_MAX_SUPPORT', '14'))
    CONE_SUBPROBLEM_TOL = float(os.getenv('SSLASSO_CONE_SUBPROBLEM_TOL', '1e-10'))
    CONE_SUBPROBLEM_MAX_ITER = int(os.getenv('SSLASSO_CONE_SUBPROBLEM_MAX_ITER', '20000'))
    RE_STARTS = int(os.getenv('SSLASSO_RE_STARTS', '8'))
    RE_SUPPORT_SAMPLES = int(os.getenv('SSLASSO_RE_SUPPORT_SAMPLES', '32'))

    # Monte Carlo
    MAX_JOBS = int(os.getenv('SSLASSO_MAX_JOBS', '4'))

    # Results store (unset disables persistence)
    RESULTS_DATABASE_URL = os.getenv('SSLASSO_RESULTS_DATABASE_URL')
    SQLALCHEMY_ECHO = _getenv_bool('SSLASSO_SQL_ECHO')

    # Logging
    LOG_LEVEL = os.getenv('SSLASSO_LOG_LEVEL', 'INFO')

    @classmethod
    def init_logging(cls):
        """Initialize logging configuration (stderr, stdout is reserved for JSON)"""
        level = getattr(logging, cls.LOG_LEVEL.upper(), logging.INFO)
        logging.basicConfig(
            level=level,
            format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
            stream=sys.stderr
        )

    @classmethod
    def validate(cls):
        """Validate configuration ranges"""
        problems = []
        if not cls.SOLVER_TOL > 0:
            problems.append('SSLASSO_SOLVER_TOL must be > 0')
        if cls.SOLVER_MAX_SWEEPS < 1:
            problems.append('SSLASSO_SOLVER_MAX_SWEEPS must be >= 1')
        if not 0 < cls.RANK_TOL < 1:
            problems.append('SSLASSO_RANK_TOL must be in (0, 1)')
        if not 1 <= cls.CONE_MAX_SUPPORT <= 20:
            problems.append('SSLASSO_CONE_MAX_SUPPORT must be in [1, 20]')
        if cls.RE_STARTS < 1:
            problems.append('SSLASSO_RE_STARTS must be >= 1')
        if cls.RE_SUPPORT_SAMPLES < 1:
            problems.append('SSLASSO_RE_SUPPORT_SAMPLES must be >= 1')
        if cls.MAX_JOBS < 1:
            problems.append('SSLASSO_MAX_JOBS must be >= 1')
        if problems:
            raise ValueError(f"Invalid configuration: {', '.join(problems)}")
