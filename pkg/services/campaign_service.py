"""
Campaign service: run Monte Carlo campaigns, persist and export them
"""

import logging
from typing import Optional

from errors import SSLassoError
from models.experiment import ExperimentConfig
from models.reports import ComparisonReport, CoverageReport
from repositories.campaign_repository import CampaignRepository
from services.simulation import run_monte_carlo, run_paired_comparison
from utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

TRIAL_LEADING_COLUMNS = ('trial_index', 'seed', 'theorem', 'variant', 'lambda', 'risk', 'rhs_bound', 'covered')


class CampaignService:
    """Service for coverage campaigns"""

    def __init__(self, campaign_repo: Optional[CampaignRepository] = None):
        """
        campaign_repo: Optional, campaigns are not stored without one
        """
        self.campaign_repo = campaign_repo

    def run(self, config: ExperimentConfig, trials: Optional[int] = None,
            master_seed: Optional[int] = None, jobs: int = 1) -> CoverageReport:
        """Run a campaign and store it when a repository is attached"""
        report = run_monte_carlo(config, trials=trials, master_seed=master_seed, jobs=jobs)
        if self.campaign_repo is not None:
            self.store(report, config)
        return report

    def compare(self, config: ExperimentConfig, trials: Optional[int] = None,
                master_seed: Optional[int] = None, jobs: int = 1) -> ComparisonReport:
        """Paired semi-supervised versus supervised comparison"""
        return run_paired_comparison(config, trials=trials, master_seed=master_seed, jobs=jobs)

    def store(self, report: CoverageReport, config: ExperimentConfig) -> bool:
        """Persist a report with its trials; failures are logged, not raised"""
        try:
            campaign = self.campaign_repo.create_campaign(report, config=config.to_dict())
            if campaign is None:
                return False
            stored = self.campaign_repo.add_trials(campaign, list(report.trial_reports))
            logger.info(f"Stored {report.theorem} campaign {campaign.id} with {stored} trials")
            return stored == len(report.trial_reports)
        except Exception as e:
            logger.error(f"Error storing campaign: {e}", exc_info=True)
            return False

    def history(self, limit: int = 10) -> dict:
        """Stored-campaign summary: coverage per theorem, failures and the latest runs"""
        if self.campaign_repo is None:
            raise SSLassoError("history needs a results store (--database or SSLASSO_RESULTS_DATABASE_URL)")
        return {
            'coverage_by_theorem': self.campaign_repo.coverage_by_theorem(),
            'failed_campaigns': self.campaign_repo.count_failed(),
            'recent': [campaign.to_dict() for campaign in self.campaign_repo.find_recent(limit=limit)],
        }

    @staticmethod
    def export_json(report, path: str, include_trials: bool = True) -> None:
        if isinstance(report, CoverageReport):
            write_json(path, report.to_dict(include_trials=include_trials))
        else:
            write_json(path, report.to_dict())

    @staticmethod
    def export_csv(report, path: str) -> None:
        """One row per trial"""
        if isinstance(report, CoverageReport):
            write_csv(path, [trial.to_row() for trial in report.trial_reports], leading=TRIAL_LEADING_COLUMNS)
        else:
            write_csv(path, list(report.rows), leading=('trial_index', 'seed'))
