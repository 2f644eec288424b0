"""
Campaign repository for results-store operations
"""

import logging
from typing import Optional, List

from sqlalchemy import func
from sqlalchemy.orm import Session

from models.campaign_record import CampaignRecord, TrialRecord
from models.reports import CoverageReport, TrialReport

logger = logging.getLogger(__name__)


class CampaignRepository:
    """Repository for Monte Carlo campaign records"""

    def __init__(self, db_session: Session):
        self.db = db_session

    def create_campaign(self, report: CoverageReport, config: Optional[dict] = None) -> Optional[CampaignRecord]:
        """Store the aggregate of a coverage campaign (trials are added separately)"""
        try:
            campaign = CampaignRecord(
                theorem=report.theorem,
                master_seed=report.master_seed,
                trials=report.trials,
                coverage=report.coverage,
                delta=report.delta,
                slack=report.slack,
                passed=report.passed,
                config=config,
                report=report.to_dict(),
            )
            self.db.add(campaign)
            self.db.commit()
            self.db.refresh(campaign)
            return campaign
        except Exception as e:
            self.db.rollback()
            logger.error(f"Error storing {report.theorem} campaign (seed {report.master_seed}): {e}", exc_info=True)
            return None

    def add_trials(self, campaign: CampaignRecord, trials: List[TrialReport]) -> int:
        """Attach per-trial rows; returns how many were stored"""
        try:
            for trial in trials:
                self.db.add(TrialRecord(
                    campaign_id=campaign.id,
                    trial_index=trial.trial_index,
                    seed=trial.seed,
                    lam=trial.lam,
                    risk=trial.risk,
                    rhs_bound=trial.rhs_bound,
                    covered=trial.covered,
                    valid=trial.valid,
                    kkt_residual=trial.kkt_residual,
                ))
            self.db.commit()
            return len(trials)
        except Exception as e:
            self.db.rollback()
            logger.error(f"Error storing trials of campaign {campaign.id}: {e}", exc_info=True)
            return 0

    def find_by_master_seed(self, theorem: str, master_seed: int) -> Optional[CampaignRecord]:
        """Latest campaign for (theorem, master_seed)"""
        try:
            return self.db.query(CampaignRecord).filter(
                CampaignRecord.theorem == theorem,
                CampaignRecord.master_seed == master_seed,
            ).order_by(CampaignRecord.id.desc()).first()
        except Exception as e:
            logger.error(f"Error finding {theorem} campaign with seed {master_seed}: {e}", exc_info=True)
            return None

    def find_recent(self, limit: int = 10) -> List[CampaignRecord]:
        """Most recently stored campaigns"""
        try:
            return self.db.query(CampaignRecord).order_by(
                CampaignRecord.id.desc()
            ).limit(limit).all()
        except Exception as e:
            logger.error(f"Error fetching recent campaigns: {e}", exc_info=True)
            return []

    def count_failed(self) -> int:
        """Number of stored campaigns that did not pass"""
        try:
            return self.db.query(CampaignRecord).filter(CampaignRecord.passed.is_(False)).count()
        except Exception as e:
            logger.error(f"Error counting failed campaigns: {e}", exc_info=True)
            return 0

    def coverage_by_theorem(self) -> dict:
        """Campaign count and mean coverage per theorem"""
        try:
            results = self.db.query(
                CampaignRecord.theorem,
                func.count(CampaignRecord.id).label('count'),
                func.avg(CampaignRecord.coverage).label('mean_coverage'),
            ).group_by(CampaignRecord.theorem).all()

            return {
                row.theorem: {'campaigns': row.count, 'mean_coverage': float(row.mean_coverage)}
                for row in results
            }
        except Exception as e:
            logger.error(f"Error getting coverage statistics: {e}", exc_info=True)
            return {}
