"""
Services module: document loading and report writing.
"""

from .document_loader import DocumentLoader, Scenario, list_presets
from .report_writer import ReportWriter

__all__ = [
    "DocumentLoader",
    "Scenario",
    "list_presets",
    "ReportWriter",
]
