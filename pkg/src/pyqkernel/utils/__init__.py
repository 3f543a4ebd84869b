"""
Utility functions and configurations for pyqkernel.

This module contains shared writers, table schemas and the namelist builder
used across the package.
"""

from .csv_config import (
    ANALYSIS_COLUMNS,
    CLASSICAL_RECORD_COLUMNS,
    RESULT_RECORD_COLUMNS,
    SCALING_COLUMNS,
)
from .io import atomic_write_frame, atomic_write_text
from .namelist import NamelistRecord

__all__ = [
    "ANALYSIS_COLUMNS",
    "CLASSICAL_RECORD_COLUMNS",
    "NamelistRecord",
    "RESULT_RECORD_COLUMNS",
    "SCALING_COLUMNS",
    "atomic_write_frame",
    "atomic_write_text",
]
