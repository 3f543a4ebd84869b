from __future__ import annotations

import itertools

import numpy as np
import pytest

from pyqkernel.exceptions import DegenerateProblemError
from pyqkernel.svm import dual_objective, to_signed, train

"""
SMO against a brute-force dual optimum on every labeling of three points.
"""

C = 1.0
TOL = 1e-6
GRID_STEP = 1e-3


@pytest.fixture(scope="module")
def kernel():
    """Fixed random positive semi-definite 3x3 kernel."""
    A = np.random.default_rng(21).normal(size=(3, 3))
    return A @ A.T


def exhaustive_dual_max(K, y, C, step=GRID_STEP):
    """Largest dual objective over a feasible grid of step ``step``."""
    ys = to_signed(y).astype(np.float64)
    grid = np.arange(0.0, C + step / 2, step)
    a0, a1 = np.meshgrid(grid, grid, indexing="ij")
    a2 = -(ys[0] * a0 + ys[1] * a1) / ys[2]
    feasible = (a2 >= -1e-12) & (a2 <= C + 1e-12)
    A = np.stack([a0[feasible], a1[feasible], np.clip(a2[feasible], 0.0, C)], axis=1)
    Q = np.outer(ys, ys) * K
    W = A.sum(axis=1) - 0.5 * np.einsum("ni,ij,nj->n", A, Q, A)
    return float(W.max())


def kkt_violation(K, y, alphas, C):
    """Largest violation over the working-set selection rule."""
    ys = to_signed(y).astype(np.float64)
    errors = K @ (alphas * ys) - ys
    positive = ys > 0
    up = (positive & (alphas < C)) | (~positive & (alphas > 0))
    low = (positive & (alphas > 0)) | (~positive & (alphas < C))
    return float(errors[low].max() - errors[up].min())


@pytest.mark.parametrize("labels", list(itertools.product([0, 1], repeat=3)))
def test_all_labelings(kernel, labels):
    """Test the dual optimum and the KKT conditions, or the single-class rejection."""
    y = np.array(labels)
    if len(set(labels)) == 1:
        with pytest.raises(DegenerateProblemError):
            train(kernel, y, C=C, tol=TOL)
        return
    model = train(kernel, y, C=C, tol=TOL)
    ours = dual_objective(model.alphas, kernel, y)
    assert ours == pytest.approx(exhaustive_dual_max(kernel, y, C), abs=1e-3)
    assert kkt_violation(kernel, y, model.alphas, C) <= TOL + 1e-12
    assert np.all((model.alphas >= 0) & (model.alphas <= C))
    assert abs(np.dot(model.alphas, to_signed(y))) < 1e-12
