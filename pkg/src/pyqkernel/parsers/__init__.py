"""
Parsers module for pyqkernel.

This module contains the parser of namelist run configurations.
"""

from .config_parser import (
    DatasetSource,
    RunConfig,
    RunConfigParser,
    parse_run_config,
)

__all__ = [
    "DatasetSource",
    "RunConfig",
    "RunConfigParser",
    "parse_run_config",
]
