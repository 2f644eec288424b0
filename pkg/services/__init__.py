"""
Service layer: estimation, geometry, tuning and simulation
"""

from .campaign_service import CampaignService

__all__ = ['CampaignService']
