"""
Datasets module for pyqkernel.

Provides a seeded synthetic generator so examples and tests run without
downloading any data.
"""

from ._toy import make_toy_dataset

__all__ = [
    "make_toy_dataset",
]
