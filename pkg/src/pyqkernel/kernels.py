"""
Classical and projected quantum Gram matrices.

Quantum kernels are built from reduced density matrices (RDMs) of every
size-``K`` qubit subsystem of the embedded states. Each point's collection of
RDMs is flattened into one complex feature vector, which turns the three
bases into matrix products:

* ``inner``: ``sum_k alpha_k Tr(rho_k rho'_k)``
* ``distance``: ``exp(-gamma sum_k alpha_k ||rho_k - rho'_k||_F^2)``
* ``inner_normalized``: inner product of the RDM collections divided by
  ``sqrt(sum_k Tr(rho_k^2))`` (unit diagonal).

Classical baselines are taken from :mod:`sklearn.metrics.pairwise`.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray
from sklearn.metrics import pairwise

from ._base_component import ParamsComponent
from .exceptions import DimensionError, NumericError
from .simulator import ComplexMatrix, Statevector, partial_trace

logger = logging.getLogger("pyqkernel")

QUANTUM_BASES = ("inner", "distance", "inner_normalized")
ALPHA_MODES = ("mean", "unit")
CLASSICAL_KINDS = ("linear", "polynomial", "rbf", "laplacian", "sigmoid")

QuantumBasis = Literal["inner", "distance", "inner_normalized"]
ClassicalKind = Literal["linear", "polynomial", "rbf", "laplacian", "sigmoid"]

_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class GramMatrix:
    """
    Square, symmetric kernel matrix over one set of points.

    Parameters
    ----------
    values : numpy.ndarray
        ``n x n`` real symmetric matrix.
    kind : str
        Kernel descriptor, e.g. ``"classical:rbf"`` or ``"quantum:distance"``.

    Examples
    --------
    >>> G = GramMatrix(np.eye(3), kind="identity")
    >>> G.n, G.trace
    (3, 3.0)
    """

    values: NDArray[np.float64] = field(repr=False)
    kind: str = "custom"

    def __post_init__(self) -> None:
        """Validate symmetry and freeze the values."""
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionError(
                f"GramMatrix: expected a square matrix, got shape {values.shape}."
            )
        if not np.all(np.isfinite(values)):
            raise NumericError("GramMatrix: matrix contains non-finite entries.")
        if values.size and np.max(np.abs(values - values.T)) > _SYMMETRY_TOL:
            raise ValueError("GramMatrix: matrix is not symmetric.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Number of points."""
        return int(self.values.shape[0])

    @property
    def trace(self) -> float:
        """Trace of the matrix."""
        return float(np.trace(self.values))

    def block(self, rows: ArrayLike, cols: ArrayLike | None = None) -> NDArray[np.float64]:
        """Return the sub-block ``values[rows][:, cols]`` (``cols`` defaults to ``rows``)."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = rows if cols is None else np.asarray(cols, dtype=np.intp)
        return self.values[np.ix_(rows, cols)]

    def __repr__(self) -> str:
        """Return a short string representation."""
        return f"GramMatrix(n={self.n}, kind='{self.kind}', trace={self.trace:.6g})"


class KernelParams(ParamsComponent):
    """
    Hyperparameters of a projected quantum kernel.

    Parameters
    ----------
    basis : {"inner", "distance", "inner_normalized"}
        Kernel family.
    K : int
        Size of the RDM subsystems, ``1 <= K <= n_qubits``.
    gamma : float
        Bandwidth of the distance basis. Ignored by the inner bases.
    alpha_mode : {"mean", "unit"}
        ``"mean"`` weights each subsystem by ``1 / N_K``, ``"unit"`` by 1.

    Examples
    --------
    >>> KernelParams(basis="distance", K=2, gamma=0.5)
    KernelParams(basis='distance', K=2, gamma=0.5, alpha_mode='mean')
    """

    def __init__(
        self,
        basis: QuantumBasis = "inner",
        K: int = 1,
        gamma: float = 1.0,
        alpha_mode: Literal["mean", "unit"] = "mean",
    ):
        self.basis = basis
        self.K = K
        self.gamma = gamma
        self.alpha_mode = alpha_mode

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the kernel hyperparameters.

        Raises
        ------
        TypeError
            If K is not an integer.
        ValueError
            If basis or alpha_mode is unknown, K < 1, or gamma is not a finite
            positive number for the distance basis.
        """
        if self.basis not in QUANTUM_BASES:
            raise ValueError(
                f"KernelParams: basis must be one of {QUANTUM_BASES}, got '{self.basis}'."
            )
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(
                f"KernelParams: alpha_mode must be one of {ALPHA_MODES}, got '{self.alpha_mode}'."
            )
        if isinstance(self.K, bool) or not isinstance(self.K, int | np.integer):
            raise TypeError(
                f"KernelParams: K must be an integer, got {type(self.K).__name__}."
            )
        if self.K < 1:
            raise ValueError(f"KernelParams: K must be >= 1, got {self.K}.")
        if self.basis == "distance" and (
            self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0
        ):
            raise ValueError(
                f"KernelParams: gamma must be finite and > 0 for the distance basis, got {self.gamma}."
            )


def subsystems(n_qubits: int, K: int) -> list[tuple[int, ...]]:
    """
    Enumerate the size-``K`` qubit subsets in lexicographic order.

    Examples
    --------
    >>> subsystems(3, 2)
    [(0, 1), (0, 2), (1, 2)]
    """
    if not 1 <= K <= n_qubits:
        raise ValueError(f"K must be in [1, {n_qubits}], got {K}.")
    return list(itertools.combinations(range(n_qubits), K))


def _pure_state_rdm(amplitudes: NDArray[np.complex128], keep: tuple[int, ...]) -> ComplexMatrix:
    n_qubits = amplitudes.shape[0].bit_length() - 1
    traced = [q for q in range(n_qubits) if q not in keep]
    psi = amplitudes.reshape([2] * n_qubits).transpose(list(keep) + traced)
    psi = psi.reshape(1 << len(keep), -1)
    return psi @ psi.conj().T


def reduced_density_matrices(
    state: Statevector | ArrayLike, K: int
) -> NDArray[np.complex128]:
    """
    Return the RDMs of all size-``K`` subsystems, stacked as ``(N_K, 2**K, 2**K)``.

    Parameters
    ----------
    state : Statevector or array_like
        Pure state, or a density matrix.
    K : int
        Subsystem size.

    Returns
    -------
    numpy.ndarray
        Complex array of stacked RDMs in :func:`subsystems` order.
    """
    if isinstance(state, Statevector):
        keeps = subsystems(state.n_qubits, K)
        return np.stack([_pure_state_rdm(state.amplitudes, keep) for keep in keeps])
    rho = np.asarray(state, dtype=np.complex128)
    n_qubits = rho.shape[0].bit_length() - 1
    return np.stack([partial_trace(rho, keep) for keep in subsystems(n_qubits, K)])


def rdm_features(
    states: Sequence[Statevector | ArrayLike], K: int, n_jobs: int | None = 1
) -> NDArray[np.complex128]:
    """
    Flatten the RDM collection of every point into one row.

    Returns
    -------
    numpy.ndarray
        Complex matrix of shape ``(n_points, N_K * 4**K)``.
    """
    if len(states) == 0:
        raise ValueError("rdm_features: no states given.")
    if n_jobs in (None, 1) or len(states) < 2:
        stacks = [reduced_density_matrices(s, K) for s in states]
    else:
        stacks = list(
            Parallel(n_jobs=n_jobs)(
                delayed(reduced_density_matrices)(s, K) for s in states
            )
        )
    shapes = {stack.shape for stack in stacks}
    if len(shapes) != 1:
        raise DimensionError(f"rdm_features: states have different sizes {shapes}.")
    return np.stack([stack.reshape(-1) for stack in stacks])


def _n_subsystems(features: NDArray[np.complex128], K: int) -> int:
    return features.shape[1] // (4**K)


def _kernel_block(
    feats_a: NDArray[np.complex128],
    feats_b: NDArray[np.complex128],
    params: KernelParams,
) -> NDArray[np.float64]:
    n_k = _n_subsystems(feats_a, params.K)
    alpha = 1.0 / n_k if params.alpha_mode == "mean" else 1.0
    overlap = np.real(feats_a @ feats_b.conj().T)
    if params.basis == "inner":
        return alpha * overlap
    if params.basis == "inner_normalized":
        norm_a = np.sqrt(np.sum(np.abs(feats_a) ** 2, axis=1))
        norm_b = np.sqrt(np.sum(np.abs(feats_b) ** 2, axis=1))
        return overlap / np.outer(norm_a, norm_b)
    sq_a = np.sum(np.abs(feats_a) ** 2, axis=1)
    sq_b = np.sum(np.abs(feats_b) ** 2, axis=1)
    distances = np.clip(sq_a[:, None] + sq_b[None, :] - 2.0 * overlap, 0.0, None)
    return np.exp(-params.gamma * alpha * distances)


def _check_K(n_qubits: int, params: KernelParams) -> None:
    if not 1 <= params.K <= n_qubits:
        raise ValueError(
            f"KernelParams: K must be in [1, {n_qubits}] for {n_qubits}-qubit states, got {params.K}."
        )


def quantum_gram_from_features(
    features: NDArray[np.complex128], params: KernelParams
) -> GramMatrix:
    """Build the quantum Gram matrix from :func:`rdm_features` rows."""
    values = _kernel_block(features, features, params)
    values = (values + values.T) / 2
    if params.basis in ("distance", "inner_normalized"):
        np.fill_diagonal(values, 1.0)
    return GramMatrix(values, kind=f"quantum:{params.basis}")


def quantum_gram(
    rhos: Sequence[Statevector | ArrayLike],
    params: KernelParams,
    n_jobs: int | None = 1,
) -> GramMatrix:
    """
    Build a projected quantum Gram matrix.

    Parameters
    ----------
    rhos : sequence of numpy.ndarray or Statevector
        Density matrices (or pure states) of equal dimension ``2**m``.
    params : KernelParams
        Basis, subsystem size, bandwidth and subsystem weighting.
    n_jobs : int, optional
        Workers used to compute the per-point RDMs.

    Returns
    -------
    GramMatrix
        Symmetric ``N x N`` kernel matrix. The inner basis is returned
        unscaled; see :func:`rescale_trace`.

    Raises
    ------
    ValueError
        If ``params.K`` exceeds the number of qubits.

    Examples
    --------
    >>> from pyqkernel.simulator import FeatureMapParams, embed
    >>> states = [embed([x], FeatureMapParams(t=1.0)) for x in (0.1, 0.5, 0.9)]
    >>> G = quantum_gram(states, KernelParams(basis="distance", K=1, gamma=1.0))
    >>> np.diag(G.values)
    array([1., 1., 1.])
    """
    first = rhos[0]
    n_qubits = (
        first.n_qubits
        if isinstance(first, Statevector)
        else np.asarray(first).shape[0].bit_length() - 1
    )
    _check_K(n_qubits, params)
    logger.debug(
        "Building %s Gram over %d points (K=%d, %d subsystems)",
        params.basis,
        len(rhos),
        params.K,
        math.comb(n_qubits, params.K),
    )
    return quantum_gram_from_features(rdm_features(rhos, params.K, n_jobs), params)


def quantum_cross_gram(
    features_a: NDArray[np.complex128],
    features_b: NDArray[np.complex128],
    params: KernelParams,
    scale: float = 1.0,
) -> NDArray[np.float64]:
    """
    Rectangular kernel block between two point sets (e.g. test rows vs train columns).

    ``scale`` multiplies the block, so the trace rescaling factor of the
    training Gram matrix can be applied to the prediction kernel.
    """
    if features_a.shape[1] != features_b.shape[1]:
        raise DimensionError("quantum_cross_gram: feature sizes differ.")
    return scale * _kernel_block(features_a, features_b, params)


def fidelity_gram(states: Sequence[Statevector]) -> GramMatrix:
    """Full-state fidelity kernel ``|<x|x'>|**2``."""
    amplitudes = np.stack([s.amplitudes for s in states])
    values = np.abs(amplitudes.conj() @ amplitudes.T) ** 2
    return GramMatrix((values + values.T) / 2, kind="quantum:fidelity")


def resolve_gamma(X: ArrayLike, gamma: float | str | None) -> float:
    """
    Turn a bandwidth specification into a number.

    ``"scale"`` (or ``None``) gives ``1 / (D * var(X))``, ``"auto"`` gives ``1 / D``.

    Examples
    --------
    >>> resolve_gamma(np.array([[0.0, 1.0], [2.0, 3.0]]), "auto")
    0.5
    """
    data = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n_features = data.shape[1]
    if gamma is None or gamma == "scale":
        variance = float(data.var())
        return 1.0 / (n_features * variance) if variance > 0 else 1.0
    if gamma == "auto":
        return 1.0 / n_features
    value = float(gamma)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"gamma must be finite and > 0, got {gamma}.")
    return value


def classical_cross_gram(
    X: ArrayLike,
    Y: ArrayLike,
    kind: ClassicalKind,
    gamma: float | str | None = "scale",
    degree: int = 3,
    coef0: float = 1.0,
) -> NDArray[np.float64]:
    """
    Evaluate a classical kernel between the rows of ``X`` and ``Y``.

    String bandwidths are resolved on ``X``.
    """
    A = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("classical kernel: feature matrix contains non-finite values.")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(
            f"classical kernel: feature counts differ ({A.shape[1]} vs {B.shape[1]})."
        )
    if kind == "linear":
        return pairwise.linear_kernel(A, B)
    g = resolve_gamma(A, gamma)
    if kind == "polynomial":
        return pairwise.polynomial_kernel(A, B, degree=degree, gamma=g, coef0=coef0)
    if kind == "rbf":
        return pairwise.rbf_kernel(A, B, gamma=g)
    if kind == "laplacian":
        return pairwise.laplacian_kernel(A, B, gamma=g)
    if kind == "sigmoid":
        return pairwise.sigmoid_kernel(A, B, gamma=g, coef0=coef0)
    raise ValueError(f"Unknown classical kernel '{kind}', expected one of {CLASSICAL_KINDS}.")


def classical_gram(
    X: ArrayLike,
    kind: ClassicalKind,
    gamma: float | str | None = "scale",
    degree: int = 3,
    coef0: float = 1.0,
) -> GramMatrix:
    """
    Build a classical Gram matrix.

    Parameters
    ----------
    X : array_like
        Feature matrix, rows are points.
    kind : {"linear", "polynomial", "rbf", "laplacian", "sigmoid"}
        Kernel family (scikit-learn formulas; laplacian uses the L1 distance).
    gamma : float or {"scale", "auto"}, default="scale"
        Bandwidth for every kind except linear.
    degree : int, default=3
        Polynomial degree.
    coef0 : float, default=1.0
        Offset of the polynomial and sigmoid kernels.

    Returns
    -------
    GramMatrix

    Warns
    -----
    UserWarning
        If a kernel other than sigmoid is not positive semi-definite.

    Examples
    --------
    >>> float(classical_gram(np.array([[1.0, 2.0], [3.0, 4.0]]), "linear").values[0, 1])
    11.0
    >>> round(float(classical_gram(np.array([[0.0], [1.0]]), "rbf", gamma=1.0).values[0, 1]), 7)
    0.3678794
    """
    values = classical_cross_gram(X, X, kind, gamma=gamma, degree=degree, coef0=coef0)
    values = (values + values.T) / 2
    if kind in ("rbf", "laplacian"):
        np.fill_diagonal(values, 1.0)
    gram = GramMatrix(values, kind=f"classical:{kind}")
    if kind != "sigmoid" and gram.n > 0 and not is_psd(gram):
        warnings.warn(
            f"Classical {kind} Gram matrix is not positive semi-definite "
            f"(min eigenvalue {min_eigenvalue(gram):.3e}).",
            UserWarning,
            stacklevel=2,
        )
    return gram


def rescale_trace(G: GramMatrix, N: int | None = None) -> GramMatrix:
    """
    Rescale a Gram matrix to trace ``N`` (``N * G / Tr(G)``).

    Parameters
    ----------
    G : GramMatrix
        Matrix to rescale.
    N : int, optional
        Target trace, defaults to the number of points.

    Raises
    ------
    NumericError
        If the trace of ``G`` is not positive.

    Examples
    --------
    >>> rescale_trace(GramMatrix(2 * np.eye(3))).values
    array([[1., 0., 0.],
           [0., 1., 0.],
           [0., 0., 1.]])
    """
    target = G.n if N is None else N
    trace = G.trace
    if not trace > 0:
        raise NumericError(f"rescale_trace: trace must be positive, got {trace}.")
    return GramMatrix(G.values * (target / trace), kind=G.kind)


def trace_scale(G: GramMatrix, N: int | None = None) -> float:
    """Return the factor applied by :func:`rescale_trace`."""
    target = G.n if N is None else N
    trace = G.trace
    if not trace > 0:
        raise NumericError(f"rescale_trace: trace must be positive, got {trace}.")
    return target / trace


def min_eigenvalue(G: GramMatrix | ArrayLike) -> float:
    """
    Smallest eigenvalue of a symmetric matrix.

    Examples
    --------
    >>> min_eigenvalue(np.diag([0.0, 1.0]))
    0.0
    """
    values = G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    return float(scipy.linalg.eigvalsh((values + values.T) / 2)[0])


def is_psd(G: GramMatrix | ArrayLike, rtol: float = 1e-8) -> bool:
    """Return whether ``min eigenvalue >= -rtol * max eigenvalue``."""
    values = G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    eigenvalues = scipy.linalg.eigvalsh((values + values.T) / 2)
    return bool(eigenvalues[0] >= -rtol * max(abs(eigenvalues[-1]), 1e-300))


__all__ = [
    "ALPHA_MODES",
    "CLASSICAL_KINDS",
    "GramMatrix",
    "KernelParams",
    "QUANTUM_BASES",
    "classical_cross_gram",
    "classical_gram",
    "fidelity_gram",
    "is_psd",
    "min_eigenvalue",
    "quantum_cross_gram",
    "quantum_gram",
    "quantum_gram_from_features",
    "rdm_features",
    "reduced_density_matrices",
    "rescale_trace",
    "resolve_gamma",
    "subsystems",
]
