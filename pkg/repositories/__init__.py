"""
Repository layer for the results store
"""

from .campaign_repository import CampaignRepository

__all__ = ['CampaignRepository']
