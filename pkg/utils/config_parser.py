"""
Parser for plain-text experiment configs

    # comment
    theorem = T1
    p = 50
    n = 40
    N = 440

Keys are case-sensitive (n and N differ). Unknown or repeated keys are
errors; python-dotenv's dotenv_values would silently keep the last value of
a repeated key, so these lines are parsed here.
"""

import dataclasses
import logging
import os
from typing import Optional

from errors import ExperimentConfigError
from models.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

INT_KEYS = frozenset({'p', 'n', 'N', 's_star', 'trials', 'master_seed', 'risk_mc_points', 'probes'})
FLOAT_KEYS = frozenset({'beta_magnitude', 'alpha', 'noise_halfwidth', 'delta', 'gamma', 'lambda_slack'})
STRING_KEYS = frozenset({'theorem', 'design', 'nonlinearity', 'variant'})
REQUIRED_KEYS = frozenset(
    f.name for f in dataclasses.fields(ExperimentConfig)
    if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
)


def _coerce(key: str, raw: str, line_no: int):
    try:
        if key in INT_KEYS:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if key in FLOAT_KEYS:
            return float(raw)
    except ValueError:
        kind = 'an integer' if key in INT_KEYS else 'a number'
        raise ExperimentConfigError(f"line {line_no}: '{key}' must be {kind}, got {raw!r}", key)
    return raw


def parse_experiment_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """
    Parse config text into an ExperimentConfig.

    Args:
        text: config document
        overrides: values replacing (or adding) keys after parsing

    Returns:
        Validated ExperimentConfig
    """
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ExperimentConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split('=', 1))
        if key not in INT_KEYS | FLOAT_KEYS | STRING_KEYS:
            raise ExperimentConfigError(f"line {line_no}: unknown key '{key}'", key)
        if key in values:
            raise ExperimentConfigError(f"line {line_no}: duplicate key '{key}'", key)
        if not raw:
            raise ExperimentConfigError(f"line {line_no}: empty value for '{key}'", key)
        values[key] = _coerce(key, raw, line_no)

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    missing = sorted(REQUIRED_KEYS - set(values))
    if missing:
        raise ExperimentConfigError(f"missing required keys: {', '.join(missing)}", missing[0])
    return ExperimentConfig(**values)


def load_experiment_config(path: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read and parse a config file"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, encoding='utf-8') as handle:
        config = parse_experiment_config(handle.read(), overrides)
    logger.debug(f"Loaded config {path}: {config.to_dict()}")
    return config
