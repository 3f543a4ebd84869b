from __future__ import annotations

import numpy as np
import pytest

from pyqkernel.kernels import ALPHA_MODES, QUANTUM_BASES, KernelParams, fidelity_gram, quantum_gram
from pyqkernel.simulator import FeatureMapParams, embed_batch

"""
Kernel validity on random six-qubit embeddings.

Every projected kernel must be symmetric and positive semi-definite, the
normalized bases must have a unit diagonal, and the inner basis over the
full register must reproduce the fidelity kernel.
"""


@pytest.fixture(scope="module")
def six_qubit_states():
    """30 embeddings of random five-feature points (six qubits)."""
    X = np.random.default_rng(11).normal(size=(30, 5))
    return embed_batch(X, FeatureMapParams(t=1.0, T=3, seed=0))


@pytest.mark.parametrize("alpha_mode", ALPHA_MODES)
@pytest.mark.parametrize("K", range(1, 7))
@pytest.mark.parametrize("basis", QUANTUM_BASES)
def test_gram_is_symmetric_psd(six_qubit_states, basis, K, alpha_mode):
    """Test symmetry and the eigenvalue floor of every kernel."""
    G = quantum_gram(six_qubit_states, KernelParams(basis, K=K, gamma=1.0, alpha_mode=alpha_mode))
    values = G.values
    assert np.max(np.abs(values - values.T)) <= 1e-10
    eigenvalues = np.linalg.eigvalsh(values)
    assert eigenvalues[0] >= -1e-8 * eigenvalues[-1]
    if basis in ("distance", "inner_normalized"):
        np.testing.assert_allclose(np.diag(values), 1.0, atol=1e-10)


def test_full_register_inner_kernel_is_fidelity():
    """Test the inner kernel with K = n_qubits and unit weight against |<x|x'>|^2."""
    X = np.random.default_rng(5).normal(size=(20, 3))
    states = embed_batch(X, FeatureMapParams(t=0.8, T=9, seed=4))
    G = quantum_gram(states, KernelParams("inner", K=4, alpha_mode="unit"))
    np.testing.assert_allclose(G.values, fidelity_gram(states).values, atol=1e-10)
