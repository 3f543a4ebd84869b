"""
PyQKernel: hyperparameter studies of projected quantum kernels.

This package simulates Hamiltonian-evolution feature maps on a statevector
backend, builds projected quantum and classical kernel (Gram) matrices,
measures the geometric difference between them, trains kernel SVMs and runs
the hyperparameter sweeps and analyses around these pieces.
"""

from __future__ import annotations

import logging
from importlib.metadata import version

from . import datasets
from .data import Dataset, PreprocessParams, load_csv, preprocess, split
from .exceptions import (
    ConfigError,
    DegenerateProblemError,
    DimensionError,
    NumericError,
    PipelineError,
)
from .gd import GdResult, RelabelParams, geometric_difference, relabel
from .kernels import GramMatrix, KernelParams, classical_gram, quantum_gram
from .parsers import RunConfig, parse_run_config
from .simulator import FeatureMapParams, Statevector, embed, embed_batch
from .svm import SvmModel, cross_validate, predict, train
from .sweep import ClassicalBaseline, GridSpec, PipelineSpec, run_pipeline, run_sweep

logging.getLogger("pyqkernel").addHandler(logging.NullHandler())

__all__ = [
    "datasets",
    "ClassicalBaseline",
    "ConfigError",
    "Dataset",
    "DegenerateProblemError",
    "DimensionError",
    "FeatureMapParams",
    "GdResult",
    "GramMatrix",
    "GridSpec",
    "KernelParams",
    "NumericError",
    "PipelineError",
    "PipelineSpec",
    "PreprocessParams",
    "RelabelParams",
    "RunConfig",
    "Statevector",
    "SvmModel",
    "classical_gram",
    "cross_validate",
    "embed",
    "embed_batch",
    "geometric_difference",
    "load_csv",
    "parse_run_config",
    "predict",
    "preprocess",
    "quantum_gram",
    "relabel",
    "run_pipeline",
    "run_sweep",
    "split",
    "train",
]

__version__ = version("pyqkernel")
