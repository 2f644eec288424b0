"""Desk-scale coverage runs of the shipped configs (pytest -m slow)"""

import os

import pytest

from config import Config
from services.simulation import run_monte_carlo, run_paired_comparison
from utils.config_parser import load_experiment_config

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')
COVERAGE_CONFIGS = ['t1.cfg', 't2a.cfg', 't2b.cfg', 't3.cfg', 'cor1.cfg', 't4.cfg', 'concentration.cfg']

pytestmark = pytest.mark.slow


def load(name):
    return load_experiment_config(os.path.join(CONFIG_DIR, name))


@pytest.mark.parametrize('name', COVERAGE_CONFIGS)
def test_config_passes(name):
    report = run_monte_carlo(load(name), jobs=Config.MAX_JOBS)
    failed = [key for key, summary in report.diagnostics.items() if not summary.passed]
    assert report.passed, f"coverage {report.coverage:.3f}, failed diagnostics {failed}"
    if report.expectation is None:
        assert report.coverage >= 1.0 - report.delta - report.slack


def test_semisupervised_beats_supervised_with_few_labels():
    report = run_paired_comparison(load('benefit.cfg'), jobs=Config.MAX_JOBS)
    assert report.passed
    assert report.medians[0] <= report.medians[1]
