from __future__ import annotations

import math

import numpy as np
import pytest

from pyqkernel.data import Dataset
from pyqkernel.exceptions import DimensionError
from pyqkernel.gd import (
    GdResult,
    RelabelParams,
    geometric_difference,
    relabel,
    relabel_dataset,
)
from pyqkernel.kernels import GramMatrix, KernelParams, classical_gram, quantum_gram, rescale_trace

"""
Tests for the geometric difference and the relabeling routine.
"""


def random_trace_n(n: int, seed: int) -> np.ndarray:
    """Random full-rank PSD matrix with trace n."""
    A = np.random.default_rng(seed).normal(size=(n, n))
    M = A @ A.T + 0.1 * np.eye(n)
    return n * M / np.trace(M)


class TestGeometricDifference:
    """Test class for geometric_difference."""

    @pytest.mark.parametrize("seed", range(5))
    def test_self_difference_is_one(self, seed):
        """Test that a kernel has unit geometric difference to itself."""
        K = random_trace_n(8, seed)
        assert geometric_difference(K, K).g == pytest.approx(1.0, abs=1e-6)

    def test_diagonal_oracle(self):
        """Test the closed form on a 2x2 diagonal pair."""
        result = geometric_difference(np.diag([0.5, 1.5]), np.eye(2))
        assert isinstance(result, GdResult)
        assert result.g == pytest.approx(math.sqrt(2), abs=1e-9)
        assert result.condition_diagnostic == pytest.approx(3.0)

    def test_accepts_gram_matrices(self):
        """Test that GramMatrix inputs give the array result."""
        K_C = random_trace_n(5, 1)
        K_Q = random_trace_n(5, 2)
        a = geometric_difference(GramMatrix(K_C), GramMatrix(K_Q)).g
        b = geometric_difference(K_C, K_Q).g
        assert a == pytest.approx(b)

    def test_not_symmetric_in_arguments(self):
        """Test that swapping the kernels changes the result."""
        K_C = np.diag([0.5, 1.5])
        K_Q = np.eye(2)
        assert geometric_difference(K_Q, K_C).g == pytest.approx(math.sqrt(1.5))

    def test_singular_classical_kernel(self):
        """Test the pseudo-inverse floor on a rank-deficient classical kernel."""
        K_C = np.array([[1.0, 1.0], [1.0, 1.0]])
        result = geometric_difference(K_C, K_C)
        assert result.condition_diagnostic > 1e12
        assert result.g == pytest.approx(1.0, abs=1e-6)

    def test_trace_must_be_normalized(self):
        """Test that unnormalized matrices are rejected."""
        with pytest.raises(ValueError, match="trace-normalized"):
            geometric_difference(2 * np.eye(3), np.eye(3))
        with pytest.raises(ValueError, match="K_Q"):
            geometric_difference(np.eye(3), 0.5 * np.eye(3))

    def test_shape_mismatch(self):
        """Test that matrices of different sizes are rejected."""
        with pytest.raises(DimensionError, match="same shape"):
            geometric_difference(np.eye(2), np.eye(3))
        with pytest.raises(DimensionError, match="square"):
            geometric_difference(np.ones((2, 3)), np.ones((2, 3)))

    def test_rbf_versus_quantum(self, states):
        """Test a classical and a quantum kernel over the same points."""
        X = np.random.default_rng(7).normal(size=(10, 4))
        K_C = classical_gram(X, "rbf", gamma=0.5)
        K_Q = rescale_trace(quantum_gram(states, KernelParams(basis="inner", K=1)))
        result = geometric_difference(K_C, K_Q)
        assert result.g > 0
        assert math.isfinite(result.g)


class TestRelabelParams:
    """Test class for RelabelParams."""

    def test_init_default(self):
        """Test default initialization."""
        params = RelabelParams()
        assert params.lam == 1.1
        assert params.flip_fraction == 0.05
        assert params.seed == 0

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"lam": 0.0}, "lam"),
            ({"flip_fraction": 1.0}, "flip_fraction"),
            ({"flip_fraction": -0.1}, "flip_fraction"),
            ({"seed": -2}, "seed"),
        ],
    )
    def test_invalid(self, kwargs, match):
        """Test invalid relabeling settings."""
        with pytest.raises(ValueError, match=match):
            RelabelParams(**kwargs)


class TestRelabel:
    """Test class for relabel and relabel_dataset."""

    K_C = random_trace_n(20, 3)
    K_Q = random_trace_n(20, 4)

    def test_binary_labels(self):
        """Test that labels are binary integers."""
        labels = relabel(self.K_C, self.K_Q)
        assert labels.dtype == np.int64
        assert set(labels.tolist()) <= {0, 1}

    def test_median_split_without_flips(self):
        """Test that without flips exactly half of the points are positive."""
        labels = relabel(self.K_C, self.K_Q, RelabelParams(flip_fraction=0.0))
        assert labels.sum() == 10

    def test_flips_only_remove_ones(self):
        """Test that forced zeros never add positive labels."""
        base = relabel(self.K_C, self.K_Q, RelabelParams(flip_fraction=0.0))
        flipped = relabel(self.K_C, self.K_Q, RelabelParams(flip_fraction=0.25, seed=1))
        assert np.all(flipped <= base)
        assert base.sum() - flipped.sum() <= 5

    def test_deterministic(self):
        """Test that the same inputs give the same labels."""
        params = RelabelParams(seed=3)
        np.testing.assert_array_equal(
            relabel(self.K_C, self.K_Q, params), relabel(self.K_C, self.K_Q, params)
        )

    def test_requires_trace_normalization(self):
        """Test that relabeling checks the traces."""
        with pytest.raises(ValueError, match="trace-normalized"):
            relabel(2 * self.K_C, self.K_Q)

    def test_relabel_dataset(self):
        """Test that relabeling keeps the features and replaces the labels."""
        X = np.random.default_rng(0).normal(size=(20, 2))
        ds = Dataset(X, np.tile([0, 1], 10), ("a", "b"), "toy")
        out = relabel_dataset(ds, self.K_C, self.K_Q, RelabelParams(flip_fraction=0.0))
        np.testing.assert_array_equal(out.X, ds.X)
        assert out.dataset_id == "toy"
        np.testing.assert_array_equal(
            out.y, relabel(self.K_C, self.K_Q, RelabelParams(flip_fraction=0.0))
        )

    def test_relabel_dataset_size_mismatch(self):
        """Test that the kernels must cover every point."""
        ds = Dataset(np.zeros((4, 1)), [0, 1, 0, 1], ("a",), "toy")
        with pytest.raises(DimensionError, match="cover 20 points"):
            relabel_dataset(ds, self.K_C, self.K_Q)
