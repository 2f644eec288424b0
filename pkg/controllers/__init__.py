"""
Controller layer for command handling
"""

from .command_controller import CommandController

__all__ = ['CommandController']
