"""
Dense statevector simulation for the Hamiltonian evolution feature map.

This module provides Haar-random initial states, the two-qubit Heisenberg
(XX + YY + ZZ) gate, the Trotterized and exact feature-map evolutions,
density matrices, partial traces and the eigendecomposition based matrix
functions (square root, pseudo-inverse, spectral norm) used downstream.

Qubit ordering is big-endian: qubit 0 is the most significant bit of the
amplitude index, so ``|q0 q1 ... q_{m-1}>`` has index ``q0 * 2**(m-1) + ...``.
All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray

from ._base_component import ParamsComponent
from .exceptions import DimensionError

logger = logging.getLogger("pyqkernel")

ComplexMatrix = NDArray[np.complex128]

#: Largest number of features the feature map accepts (n + 1 <= 8 qubits).
MAX_FEATURES = 7

# XX + YY + ZZ = 2 * SWAP - I; triplet eigenvalue +1, singlet eigenvalue -3.
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
_TRIPLET_PROJECTOR = (np.eye(4, dtype=np.complex128) + _SWAP) / 2
_SINGLET_PROJECTOR = (np.eye(4, dtype=np.complex128) - _SWAP) / 2
_H_XYZ = 2 * _SWAP - np.eye(4, dtype=np.complex128)

_NORM_TOL = 1e-10
_SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class Statevector:
    """
    Pure state of ``n_qubits`` qubits in big-endian amplitude order.

    Parameters
    ----------
    amplitudes : array_like of complex
        ``2**n_qubits`` amplitudes. Must have unit norm within 1e-10.

    Examples
    --------
    >>> s = Statevector(np.array([1, 0], dtype=complex))
    >>> s.n_qubits
    1
    """

    amplitudes: NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        """Validate the amplitude vector and freeze it."""
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        dim = amps.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise DimensionError(
                f"Statevector: amplitude count must be a power of two >= 2, got {dim}."
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"Statevector: norm must be 1, got {np.sqrt(norm)}.")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        """Number of qubits of the state."""
        return int(self.amplitudes.shape[0]).bit_length() - 1

    def fidelity(self, other: Statevector) -> float:
        """Return the squared overlap ``|<self|other>|**2``."""
        if other.n_qubits != self.n_qubits:
            raise DimensionError(
                f"Statevector: qubit count mismatch ({self.n_qubits} vs {other.n_qubits})."
            )
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def __repr__(self) -> str:
        """Return a short string representation."""
        return f"Statevector(n_qubits={self.n_qubits})"


class FeatureMapParams(ParamsComponent):
    """
    Hyperparameters of the Hamiltonian evolution feature map.

    Parameters
    ----------
    t : float
        Total evolution time, must be finite and positive.
    T : int
        Number of Trotter steps, at least 1.
    seed : int
        Seed of the Haar-random initial product state.

    Examples
    --------
    >>> FeatureMapParams(t=0.5, T=9, seed=3)
    FeatureMapParams(t=0.5, T=9, seed=3)
    """

    def __init__(self, t: float = 1.0, T: int = 1, seed: int = 0):
        self.t = t
        self.T = T
        self.seed = seed

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the feature-map hyperparameters.

        Raises
        ------
        TypeError
            If T or seed is not an integer.
        ValueError
            If t is not finite and positive, T < 1 or seed is negative.
        """
        if not np.isfinite(self.t) or self.t <= 0:
            raise ValueError(f"FeatureMapParams: t must be finite and > 0, got {self.t}.")
        if isinstance(self.T, bool) or not isinstance(self.T, int | np.integer):
            raise TypeError(
                f"FeatureMapParams: T must be an integer, got {type(self.T).__name__}."
            )
        if self.T < 1:
            raise ValueError(f"FeatureMapParams: T must be >= 1, got {self.T}.")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int | np.integer):
            raise TypeError(
                f"FeatureMapParams: seed must be an integer, got {type(self.seed).__name__}."
            )
        if self.seed < 0:
            raise ValueError(f"FeatureMapParams: seed must be >= 0, got {self.seed}.")


def haar_random_qubit_state(seed: int, qubit_index: int) -> Statevector:
    """
    Sample a Haar-random single-qubit state.

    Two complex standard normals are drawn and normalized. The random stream is
    derived from ``numpy.random.SeedSequence(seed, spawn_key=(qubit_index,))``,
    so each qubit of a product state gets an independent, reproducible draw.

    Parameters
    ----------
    seed : int
        Non-negative global seed.
    qubit_index : int
        Non-negative index of the qubit.

    Returns
    -------
    Statevector
        Unit-norm one-qubit state.

    Examples
    --------
    >>> a = haar_random_qubit_state(7, 0)
    >>> b = haar_random_qubit_state(7, 0)
    >>> bool(np.array_equal(a.amplitudes, b.amplitudes))
    True
    """
    if seed < 0 or qubit_index < 0:
        raise ValueError(
            f"seed and qubit_index must be non-negative, got {seed}, {qubit_index}."
        )
    rng = np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=(int(qubit_index),))
    )
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return Statevector(z / np.linalg.norm(z))


def haar_product_state(n_qubits: int, seed: int) -> Statevector:
    """Return the tensor product of per-qubit Haar-random states (qubit 0 first)."""
    if n_qubits < 1:
        raise DimensionError(f"n_qubits must be >= 1, got {n_qubits}.")
    factors = [haar_random_qubit_state(seed, q).amplitudes for q in range(n_qubits)]
    return Statevector(reduce(np.kron, factors))


def heisenberg_gate(theta: float) -> ComplexMatrix:
    """
    Return ``exp(-i * theta * (XX + YY + ZZ))`` as a 4x4 unitary.

    Built from the spectral decomposition of the Heisenberg coupling: the
    triplet subspace picks up ``exp(-i theta)`` and the singlet ``exp(3 i theta)``.

    Parameters
    ----------
    theta : float
        Rotation angle, must be finite.

    Returns
    -------
    numpy.ndarray
        Complex 4x4 unitary matrix.

    Examples
    --------
    >>> bool(np.allclose(heisenberg_gate(0.0), np.eye(4)))
    True
    """
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}.")
    return (
        np.exp(-1j * theta) * _TRIPLET_PROJECTOR
        + np.exp(3j * theta) * _SINGLET_PROJECTOR
    )


def apply_two_qubit_gate(
    amplitudes: NDArray[np.complex128], gate: ComplexMatrix, first_qubit: int
) -> NDArray[np.complex128]:
    """
    Apply a 4x4 gate to the adjacent qubit pair ``(first_qubit, first_qubit + 1)``.

    Parameters
    ----------
    amplitudes : numpy.ndarray
        Big-endian amplitude vector of length ``2**m``.
    gate : numpy.ndarray
        4x4 matrix acting on the pair, first qubit as the most significant bit.
    first_qubit : int
        Index of the first qubit of the pair.

    Returns
    -------
    numpy.ndarray
        New amplitude vector.
    """
    n_qubits = amplitudes.shape[0].bit_length() - 1
    if not 0 <= first_qubit < n_qubits - 1:
        raise DimensionError(
            f"Qubit pair ({first_qubit}, {first_qubit + 1}) is outside a "
            f"{n_qubits}-qubit register."
        )
    left = 1 << first_qubit
    right = 1 << (n_qubits - first_qubit - 2)
    psi = amplitudes.reshape(left, 4, right)
    return np.einsum("ab,ibk->iak", gate, psi).reshape(-1)


def _check_features(x: ArrayLike) -> NDArray[np.float64]:
    features = np.asarray(x, dtype=np.float64).reshape(-1)
    if not 1 <= features.shape[0] <= MAX_FEATURES:
        raise DimensionError(
            f"Feature map accepts 1 to {MAX_FEATURES} features, got {features.shape[0]}."
        )
    if not np.all(np.isfinite(features)):
        raise ValueError("Feature vector contains non-finite values.")
    return features


def embed(x: ArrayLike, params: FeatureMapParams) -> Statevector:
    """
    Embed a feature vector with the Trotterized Hamiltonian evolution feature map.

    For ``n`` features the state lives on ``n + 1`` qubits. One Trotter slice
    applies ``exp(-i (t/T) x_j H_j)`` for ``j = 0 .. n-1`` in ascending order,
    where ``H_j`` couples qubits ``j`` and ``j + 1``; the slice is repeated
    ``T`` times on the Haar-random product state seeded by ``params.seed``.

    Parameters
    ----------
    x : array_like
        Feature vector of length 1 to 7.
    params : FeatureMapParams
        Evolution time, Trotter steps and Haar seed.

    Returns
    -------
    Statevector
        Embedded state on ``n + 1`` qubits.

    Raises
    ------
    DimensionError
        If the number of features is outside ``[1, 7]``.

    Examples
    --------
    >>> s = embed([0.3, -1.2], FeatureMapParams(t=1.0, T=3, seed=1))
    >>> s.n_qubits
    3
    """
    features = _check_features(x)
    amplitudes = haar_product_state(features.shape[0] + 1, params.seed).amplitudes
    step = params.t / params.T
    gates = [heisenberg_gate(step * xj) for xj in features]
    for _ in range(params.T):
        for j, gate in enumerate(gates):
            amplitudes = apply_two_qubit_gate(amplitudes, gate, j)
    return Statevector(amplitudes)


def heisenberg_hamiltonian(x: ArrayLike) -> ComplexMatrix:
    """Return ``sum_j x_j (X_j X_{j+1} + Y_j Y_{j+1} + Z_j Z_{j+1})`` on ``n + 1`` qubits."""
    features = _check_features(x)
    n_qubits = features.shape[0] + 1
    dim = 1 << n_qubits
    hamiltonian = np.zeros((dim, dim), dtype=np.complex128)
    for j, xj in enumerate(features):
        left = np.eye(1 << j, dtype=np.complex128)
        right = np.eye(1 << (n_qubits - j - 2), dtype=np.complex128)
        hamiltonian += xj * np.kron(np.kron(left, _H_XYZ), right)
    return hamiltonian


def embed_exact(x: ArrayLike, params: FeatureMapParams) -> Statevector:
    """
    Embed a feature vector with the exact (non-Trotterized) evolution.

    Applies ``exp(-i t sum_j x_j H_j)`` through a Hermitian eigendecomposition of
    the full Hamiltonian. ``params.T`` is ignored. Used as a convergence oracle
    for :func:`embed`.

    Examples
    --------
    >>> p = FeatureMapParams(t=0.7, T=1, seed=2)
    >>> a, b = embed([0.4], p), embed_exact([0.4], p)
    >>> round(a.fidelity(b), 10)
    1.0
    """
    hamiltonian = heisenberg_hamiltonian(x)
    psi0 = haar_product_state(hamiltonian.shape[0].bit_length() - 1, params.seed)
    eigenvalues, eigenvectors = scipy.linalg.eigh(hamiltonian)
    phases = np.exp(-1j * params.t * eigenvalues)
    amplitudes = eigenvectors @ (phases * (eigenvectors.conj().T @ psi0.amplitudes))
    return Statevector(amplitudes)


def embed_batch(
    X: ArrayLike, params: FeatureMapParams, n_jobs: int | None = 1
) -> list[Statevector]:
    """Embed every row of ``X``; rows are distributed over ``n_jobs`` workers."""
    rows = np.atleast_2d(np.asarray(X, dtype=np.float64))
    logger.debug(
        "Embedding %d points (t=%s, T=%d, seed=%d)",
        rows.shape[0],
        params.t,
        params.T,
        params.seed,
    )
    if n_jobs in (None, 1) or rows.shape[0] < 2:
        return [embed(row, params) for row in rows]
    return list(Parallel(n_jobs=n_jobs)(delayed(embed)(row, params) for row in rows))


def density_matrix(state: Statevector) -> ComplexMatrix:
    """
    Return the pure-state density matrix ``|s><s|``.

    Examples
    --------
    >>> density_matrix(Statevector(np.array([1, 0], dtype=complex))).real
    array([[1., 0.],
           [0., 0.]])
    """
    amps = state.amplitudes
    return np.outer(amps, amps.conj())


def partial_trace(rho: ArrayLike, keep: Sequence[int]) -> ComplexMatrix:
    """
    Trace out every qubit not listed in ``keep``.

    Parameters
    ----------
    rho : array_like
        Density matrix on ``m`` qubits (big-endian).
    keep : sequence of int
        Qubits to keep. Order in the output follows ascending qubit index.

    Returns
    -------
    numpy.ndarray
        Reduced density matrix of dimension ``2**len(keep)``.

    Raises
    ------
    ValueError
        If ``keep`` is empty, has duplicates or indices outside ``[0, m)``.

    Examples
    --------
    >>> bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    >>> partial_trace(np.outer(bell, bell.conj()), [0]).real
    array([[0.5, 0. ],
           [0. , 0.5]])
    """
    matrix = np.asarray(rho, dtype=np.complex128)
    dim = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape != (dim, dim) or dim < 2 or dim & (dim - 1):
        raise DimensionError(
            f"partial_trace: rho must be a square 2**m matrix, got shape {matrix.shape}."
        )
    n_qubits = dim.bit_length() - 1
    kept = sorted(int(q) for q in keep)
    if not kept:
        raise ValueError("partial_trace: keep must name at least one qubit.")
    if len(set(kept)) != len(kept):
        raise ValueError(f"partial_trace: duplicate qubits in keep={list(keep)}.")
    if kept[0] < 0 or kept[-1] >= n_qubits:
        raise ValueError(
            f"partial_trace: keep={list(keep)} is out of range for {n_qubits} qubits."
        )
    if len(kept) == n_qubits:
        return matrix.copy()
    traced = [q for q in range(n_qubits) if q not in kept]
    order = kept + traced
    tensor = matrix.reshape([2] * (2 * n_qubits))
    tensor = tensor.transpose(order + [q + n_qubits for q in order])
    dk, dt = 1 << len(kept), 1 << len(traced)
    return np.trace(tensor.reshape(dk, dt, dk, dt), axis1=1, axis2=3)


def _symmetric_eigh(
    matrix: ArrayLike, name: str
) -> tuple[NDArray[np.float64], NDArray[np.complex128] | NDArray[np.float64]]:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name}: expected a square matrix, got shape {m.shape}.")
    asymmetry = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if asymmetry > _SYMMETRY_TOL:
        raise ValueError(
            f"{name}: matrix is not symmetric/Hermitian (max deviation {asymmetry:.3e})."
        )
    hermitian = (m + m.conj().T) / 2
    return scipy.linalg.eigh(hermitian)


def psd_sqrt(matrix: ArrayLike) -> NDArray[np.float64] | ComplexMatrix:
    """
    Square root of a symmetric/Hermitian matrix, clipping negative eigenvalues to 0.

    Examples
    --------
    >>> psd_sqrt(np.diag([4.0, 9.0]))
    array([[2., 0.],
           [0., 3.]])
    """
    eigenvalues, eigenvectors = _symmetric_eigh(matrix, "psd_sqrt")
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * roots) @ eigenvectors.conj().T


def psd_pinv(
    matrix: ArrayLike, floor: float = 1e-12
) -> NDArray[np.float64] | ComplexMatrix:
    """
    Pseudo-inverse of a symmetric/Hermitian matrix.

    Eigenvalues ``>= floor * lambda_max`` are inverted, all others (including
    negative ones) are set to zero.

    Parameters
    ----------
    matrix : array_like
        Symmetric or Hermitian matrix.
    floor : float, default=1e-12
        Relative eigenvalue threshold.
    """
    eigenvalues, eigenvectors = _symmetric_eigh(matrix, "psd_pinv")
    if eigenvalues.size == 0:
        return np.zeros_like(eigenvectors)
    cutoff = floor * max(float(eigenvalues[-1]), 0.0)
    keep = eigenvalues >= cutoff
    keep &= eigenvalues > 0
    inverted = np.zeros_like(eigenvalues)
    inverted[keep] = 1.0 / eigenvalues[keep]
    return (eigenvectors * inverted) @ eigenvectors.conj().T


def spectral_norm(matrix: ArrayLike) -> float:
    """Largest absolute eigenvalue of a symmetric/Hermitian matrix."""
    eigenvalues, _ = _symmetric_eigh(matrix, "spectral_norm")
    return float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0


__all__ = [
    "ComplexMatrix",
    "FeatureMapParams",
    "MAX_FEATURES",
    "Statevector",
    "apply_two_qubit_gate",
    "density_matrix",
    "embed",
    "embed_batch",
    "embed_exact",
    "haar_product_state",
    "haar_random_qubit_state",
    "heisenberg_gate",
    "heisenberg_hamiltonian",
    "partial_trace",
    "psd_pinv",
    "psd_sqrt",
    "spectral_norm",
]
