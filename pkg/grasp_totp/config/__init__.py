"""
Configuration package for the grasp planner
"""

from .settings import PRESETS_DIR, Settings, get_settings, reset_settings, set_settings

__all__ = ["PRESETS_DIR", "Settings", "get_settings", "reset_settings", "set_settings"]
