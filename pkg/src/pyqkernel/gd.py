"""
Geometric difference between kernel matrices and quantum-favorable relabeling.

The geometric difference ``g = sqrt(|| sqrt(K_Q) K_C^{-1} sqrt(K_Q) ||)`` measures
how far the geometry of a quantum Gram matrix departs from a classical one.
Both matrices must be trace-normalized to ``N`` (see
:func:`pyqkernel.kernels.rescale_trace`). The relabeling routine builds labels
that saturate the separation between the two kernels.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from ._base_component import ParamsComponent
from .data import Dataset
from .exceptions import DimensionError
from .kernels import GramMatrix
from .simulator import psd_pinv, psd_sqrt, spectral_norm

logger = logging.getLogger("pyqkernel")

_TRACE_TOL = 1e-6


@dataclass(frozen=True)
class GdResult:
    """
    Geometric difference between a classical and a quantum Gram matrix.

    Parameters
    ----------
    g : float
        Geometric difference, ``>= 0``.
    condition_diagnostic : float
        ``lambda_max / lambda_min`` of the classical matrix (``inf`` when singular).
    """

    g: float
    condition_diagnostic: float


class RelabelParams(ParamsComponent):
    """
    Settings of the artificial-label generator.

    Parameters
    ----------
    lam : float, default=1.1
        Ridge term added to the classical Gram matrix.
    flip_fraction : float, default=0.05
        Fraction of labels forced to 0 after binarization.
    seed : int, default=0
        Seed of the forced-to-zero positions.

    Examples
    --------
    >>> RelabelParams()
    RelabelParams(lam=1.1, flip_fraction=0.05, seed=0)
    """

    def __init__(self, lam: float = 1.1, flip_fraction: float = 0.05, seed: int = 0):
        self.lam = lam
        self.flip_fraction = flip_fraction
        self.seed = seed

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the relabeling settings.

        Raises
        ------
        ValueError
            If lam is not positive, flip_fraction is outside [0, 1) or seed < 0.
        """
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"RelabelParams: lam must be > 0, got {self.lam}.")
        if not 0.0 <= self.flip_fraction < 1.0:
            raise ValueError(
                f"RelabelParams: flip_fraction must be in [0, 1), got {self.flip_fraction}."
            )
        if self.seed < 0:
            raise ValueError(f"RelabelParams: seed must be >= 0, got {self.seed}.")


def _as_array(G: GramMatrix | ArrayLike) -> NDArray[np.float64]:
    return G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)


def _check_pair(
    K_C: GramMatrix | ArrayLike, K_Q: GramMatrix | ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    kc, kq = _as_array(K_C), _as_array(K_Q)
    if kc.ndim != 2 or kc.shape[0] != kc.shape[1]:
        raise DimensionError(f"K_C must be square, got shape {kc.shape}.")
    if kc.shape != kq.shape:
        raise DimensionError(
            f"K_C and K_Q must have the same shape, got {kc.shape} and {kq.shape}."
        )
    n = kc.shape[0]
    for name, matrix in (("K_C", kc), ("K_Q", kq)):
        trace = float(np.trace(matrix))
        if abs(trace - n) > _TRACE_TOL:
            raise ValueError(
                f"{name} must be trace-normalized to {n}, got trace {trace:.9g}; "
                "call rescale_trace first."
            )
    return kc, kq


def geometric_difference(
    K_C: GramMatrix | ArrayLike, K_Q: GramMatrix | ArrayLike, floor: float = 1e-12
) -> GdResult:
    """
    Compute the geometric difference ``g(K_C || K_Q)``.

    Parameters
    ----------
    K_C : GramMatrix or array_like
        Classical Gram matrix with trace ``N``.
    K_Q : GramMatrix or array_like
        Quantum Gram matrix with trace ``N``.
    floor : float, default=1e-12
        Relative eigenvalue floor of the pseudo-inverse of ``K_C``.

    Returns
    -------
    GdResult

    Raises
    ------
    DimensionError
        If the shapes differ.
    ValueError
        If either trace differs from ``N`` by more than 1e-6.

    Examples
    --------
    >>> res = geometric_difference(np.diag([0.5, 1.5]), np.eye(2))
    >>> round(res.g, 9)
    1.414213562
    """
    kc, kq = _check_pair(K_C, K_Q)
    sqrt_q = psd_sqrt(kq)
    body = sqrt_q @ psd_pinv(kc, floor=floor) @ sqrt_q
    g = math.sqrt(spectral_norm((body + body.conj().T) / 2))

    eigenvalues = scipy.linalg.eigvalsh((kc + kc.T) / 2)
    condition = (
        float(eigenvalues[-1] / eigenvalues[0]) if eigenvalues[0] > 0 else math.inf
    )
    if not math.isfinite(g):
        warnings.warn(
            "Geometric difference is not finite.", RuntimeWarning, stacklevel=2
        )
    return GdResult(g=g, condition_diagnostic=condition)


def relabel(
    K_C: GramMatrix | ArrayLike,
    K_Q: GramMatrix | ArrayLike,
    params: RelabelParams | None = None,
) -> NDArray[np.int64]:
    """
    Generate binary labels that favour the quantum kernel.

    Builds ``M = sqrt(K_Q) (K_C + lam I)^{-1} sqrt(K_Q)``, takes the eigenvector
    ``v`` of the largest absolute eigenvalue, and sets ``y = sqrt(K_Q) v``. The
    sign of ``v`` is fixed so that ``sum(y) > 0``. Labels are 1 where ``y`` is
    strictly greater than its median, then ``floor(flip_fraction * n)`` seeded
    positions are set to 0.

    Parameters
    ----------
    K_C, K_Q : GramMatrix or array_like
        Trace-normalized Gram matrices over the complete dataset.
    params : RelabelParams, optional
        Ridge term, flip fraction and seed.

    Returns
    -------
    numpy.ndarray
        Integer labels in ``{0, 1}``.
    """
    params = params or RelabelParams()
    kc, kq = _check_pair(K_C, K_Q)
    n = kc.shape[0]
    sqrt_q = np.real(psd_sqrt(kq))
    ridge = scipy.linalg.cho_factor((kc + kc.T) / 2 + params.lam * np.eye(n))
    body = sqrt_q @ scipy.linalg.cho_solve(ridge, sqrt_q)
    eigenvalues, eigenvectors = scipy.linalg.eigh((body + body.T) / 2)
    v = eigenvectors[:, int(np.argmax(np.abs(eigenvalues)))]
    y = sqrt_q @ v
    if y.sum() < 0:
        y = -y

    labels = (y > np.median(y)).astype(np.int64)
    n_flip = int(math.floor(params.flip_fraction * n + 1e-9))
    if n_flip:
        rng = np.random.default_rng(params.seed)
        labels[rng.choice(n, size=n_flip, replace=False)] = 0
    logger.debug(
        "Relabeled %d points: %d ones, %d forced to zero", n, int(labels.sum()), n_flip
    )
    return labels


def relabel_dataset(
    ds: Dataset,
    K_C: GramMatrix | ArrayLike,
    K_Q: GramMatrix | ArrayLike,
    params: RelabelParams | None = None,
) -> Dataset:
    """Return ``ds`` with the labels produced by :func:`relabel`."""
    kc = _as_array(K_C)
    if kc.shape[0] != ds.n_points:
        raise DimensionError(
            f"Gram matrices cover {kc.shape[0]} points, dataset has {ds.n_points}."
        )
    return ds.with_labels(relabel(K_C, K_Q, params))


__all__ = ["GdResult", "RelabelParams", "geometric_difference", "relabel", "relabel_dataset"]
