"""
Results-store models for Monte Carlo campaigns
"""

from sqlalchemy import Column, Integer, String, Float, Boolean, DateTime, JSON, ForeignKey
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class CampaignRecord(Base):
    """One run_monte_carlo aggregate"""

    __tablename__ = 'campaigns'

    id = Column(Integer, primary_key=True, autoincrement=True)
    theorem = Column(String(16), nullable=False, index=True)        # e.g. "T1", "Cor1"
    master_seed = Column(Integer, nullable=False, index=True)
    trials = Column(Integer, nullable=False)
    coverage = Column(Float, nullable=False)
    delta = Column(Float, nullable=False)
    slack = Column(Float, nullable=False)
    passed = Column(Boolean, nullable=False)
    config = Column(JSON, nullable=True)                             # ExperimentConfig.to_dict()
    report = Column(JSON, nullable=True)                             # CoverageReport.to_dict()
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    trial_records = relationship(
        'TrialRecord', back_populates='campaign', cascade='all, delete-orphan',
        order_by='TrialRecord.trial_index'
    )

    __table_args__ = (
        {'sqlite_autoincrement': True}
    )

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'id': self.id,
            'theorem': self.theorem,
            'master_seed': self.master_seed,
            'trials': self.trials,
            'coverage': self.coverage,
            'delta': self.delta,
            'slack': self.slack,
            'passed': self.passed,
            'config': self.config,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }

    def __repr__(self):
        return (f"<CampaignRecord(theorem='{self.theorem}', seed={self.master_seed}, "
                f"coverage={self.coverage:.3f}, passed={self.passed})>")


class TrialRecord(Base):
    """One trial of a stored campaign"""

    __tablename__ = 'trials'

    id = Column(Integer, primary_key=True, autoincrement=True)
    campaign_id = Column(Integer, ForeignKey('campaigns.id'), nullable=False, index=True)
    trial_index = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    lam = Column(Float, nullable=False)
    risk = Column(Float, nullable=False)
    rhs_bound = Column(Float, nullable=False)
    covered = Column(Boolean, nullable=False)
    valid = Column(Boolean, nullable=False, default=True)
    kkt_residual = Column(Float, nullable=True)

    campaign = relationship('CampaignRecord', back_populates='trial_records')

    __table_args__ = (
        {'sqlite_autoincrement': True}
    )

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'trial_index': self.trial_index,
            'seed': self.seed,
            'lambda': self.lam,
            'risk': self.risk,
            'rhs_bound': self.rhs_bound,
            'covered': self.covered,
            'valid': self.valid,
            'kkt_residual': self.kkt_residual,
        }

    def __repr__(self):
        return f"<TrialRecord(index={self.trial_index}, seed={self.seed}, covered={self.covered})>"
