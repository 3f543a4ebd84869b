from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from pyqkernel.analysis import marginal
from pyqkernel.data import preprocess
from pyqkernel.datasets import make_toy_dataset
from pyqkernel.gd import geometric_difference
from pyqkernel.sweep import GridSpec, run_sweep

"""
Geometric difference: identity, the diagonal oracle and the growth with the
bandwidth of the distance kernel.
"""


def random_trace_n(n: int, seed: int) -> np.ndarray:
    """Random PSD matrix with trace n."""
    A = np.random.default_rng(seed).normal(size=(n, n))
    M = A @ A.T
    return n * M / np.trace(M)


@pytest.mark.parametrize("seed", range(10))
def test_self_difference(seed):
    """Test g(K || K) = 1."""
    K = random_trace_n(8, seed)
    assert geometric_difference(K, K).g == pytest.approx(1.0, abs=1e-6)


def test_diagonal_oracle():
    """Test K_C = diag(0.5, 1.5), K_Q = I against sqrt(2)."""
    result = geometric_difference(np.diag([0.5, 1.5]), np.eye(2))
    assert result.g == pytest.approx(math.sqrt(2), abs=1e-9)


@pytest.mark.slow
def test_gd_grows_with_gamma():
    """Test that the gamma marginal of the GD is increasing on a 100-point dataset."""
    ds = preprocess(
        make_toy_dataset(n_points=140, n_informative=2, n_noise=3, seed=6),
        target_features=5,
        target_points=100,
    )
    assert ds.n_points == 100
    spec = GridSpec(
        t_values=[0.25, 1.0],
        T_values=[1],
        K_values=[1, 2],
        C_values=[1.0],
        bases=["distance"],
    )
    records = run_sweep(ds, spec, folds=0, n_jobs=-1)
    curve = marginal(records, "gamma", "gd_rbf")
    assert len(curve.values) == 13
    correlation = spearmanr(curve.values, curve.mean).statistic
    assert correlation >= 0.9
