from __future__ import annotations

import numpy as np
import pytest

from pyqkernel.data import preprocess
from pyqkernel.datasets import make_toy_dataset
from pyqkernel.sweep import (
    GridSpec,
    best_accuracy,
    build_grid,
    pipeline_points,
    run_pipeline,
    run_sweep,
)

"""
Default hyperparameter grid and the reduced search built on top of it.
"""


class TestDefaultGrid:
    """Test class for the default GridSpec."""

    def test_t_values(self):
        """Test 13 powers of two from 2^-6 to 2^6."""
        assert GridSpec().t_values == tuple(2.0**k for k in range(-6, 7))

    def test_trotter_steps(self):
        """Test the powers of three up to 81."""
        assert GridSpec().T_values == (1, 3, 9, 27, 81)

    def test_gamma_values(self):
        """Test 13 log-spaced values over [1e-3, 1e3]."""
        gamma = GridSpec().gamma_values
        assert len(gamma) == 13
        np.testing.assert_allclose(gamma, np.logspace(-3, 3, 13), rtol=1e-12)

    def test_C_values(self):
        """Test 13 log-spaced values over [1e-1, 1e5]."""
        C = GridSpec().C_values
        assert len(C) == 13
        np.testing.assert_allclose(C, np.logspace(-1, 5, 13), rtol=1e-12)

    @pytest.mark.parametrize("n_features", range(1, 8))
    def test_subsystem_sizes(self, n_features):
        """Test K = 1 .. D + 1."""
        assert GridSpec().resolved_K(n_features) == tuple(range(1, n_features + 2))

    @pytest.mark.parametrize(("n_features", "size"), [(1, 23660), (5, 70980)])
    def test_size(self, n_features, size):
        """Test the number of points of the full grid."""
        assert GridSpec().size(n_features) == size
        assert len(build_grid(GridSpec(), n_features)) == size


class TestReducedSearch:
    """Test class for the reduced search against the full grid."""

    @pytest.fixture(scope="class")
    def easy_dataset(self):
        """Well separated one-feature toy dataset."""
        raw = make_toy_dataset(n_points=36, n_informative=1, n_noise=0, separation=3.0, seed=2)
        return preprocess(raw, target_features=1, target_points=36)

    def test_reduction(self, toy_dataset):
        """Test that the reduced search uses at most 5% of the full grid."""
        ds = preprocess(toy_dataset, target_points=60)
        assert len(pipeline_points(ds)) <= 0.05 * GridSpec().size(ds.n_features)

    @pytest.mark.slow
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_best_accuracy_close_to_full_grid(self, easy_dataset):
        """Test that the reduced search loses at most 0.03 test accuracy."""
        full = best_accuracy(run_sweep(easy_dataset, folds=0, n_jobs=-1))
        reduced = best_accuracy(run_pipeline(easy_dataset, folds=0, n_jobs=-1))
        assert reduced >= full - 0.03
