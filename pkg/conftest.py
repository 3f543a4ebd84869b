"""Fixtures for testing the pyqkernel package."""

import numpy as np
import pandas as pd
import pytest

import pyqkernel
from pyqkernel.data import Dataset, preprocess
from pyqkernel.datasets import make_toy_dataset
from pyqkernel.kernels import KernelParams
from pyqkernel.simulator import FeatureMapParams, embed_batch


@pytest.fixture(autouse=True, scope="session")
def add_doctest_namespace(doctest_namespace: dict) -> dict:
    """Populate the doctest namespace."""
    doctest_namespace["np"] = np
    doctest_namespace["pd"] = pd
    doctest_namespace["pyqkernel"] = pyqkernel
    return doctest_namespace


@pytest.fixture
def toy_dataset() -> Dataset:
    """Raw separable toy problem with two informative and three noise features."""
    return make_toy_dataset(n_points=80, n_informative=2, n_noise=3, seed=0)


@pytest.fixture
def small_dataset() -> Dataset:
    """Preprocessed three-feature dataset, small enough for full sweeps."""
    raw = make_toy_dataset(n_points=60, n_informative=2, n_noise=1, seed=4)
    return preprocess(raw, target_features=3, target_points=36, seed=0)


@pytest.fixture
def feature_map() -> FeatureMapParams:
    """Feature map with a moderate evolution time."""
    return FeatureMapParams(t=0.5, T=3, seed=0)


@pytest.fixture
def states(feature_map: FeatureMapParams) -> list:
    """Embedded states of ten random four-feature points."""
    X = np.random.default_rng(7).normal(size=(10, 4))
    return embed_batch(X, feature_map)


@pytest.fixture
def raw_csv(tmp_path):
    """Raw CSV file with a string label column and one incomplete row."""
    rng = np.random.default_rng(3)
    frame = pd.DataFrame(rng.normal(size=(40, 4)), columns=["a", "b", "c", "d"])
    frame["species"] = np.where(np.arange(40) % 2 == 0, "setosa", "virginica")
    frame.loc[5, "b"] = np.nan
    path = tmp_path / "raw.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def inner_params() -> KernelParams:
    """Inner-product kernel on all one-qubit subsystems."""
    return KernelParams(basis="inner", K=1)
