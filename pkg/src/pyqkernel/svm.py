"""
Soft-margin SVM on precomputed Gram matrices.

The dual problem

    max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

is solved by sequential minimal optimization: at every step the maximal
KKT-violating pair (``i`` with the smallest error in the "up" set, ``j`` with
the largest error in the "low" set, i.e. the largest ``|E_i - E_j|``) is
optimized analytically. Labels in ``{0, 1}`` are mapped to ``{-1, +1}``
internally.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray
from sklearn.model_selection import StratifiedKFold

from .exceptions import DegenerateProblemError, DimensionError
from .kernels import GramMatrix

logger = logging.getLogger("pyqkernel")

_TAU = 1e-12
#: Alphas closer than this share of C to a bound are set to the bound.
_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class SvmModel:
    """
    Trained SVM over a precomputed kernel.

    Parameters
    ----------
    dual_coefficients : numpy.ndarray
        ``alpha_i * y_i`` for every training point (zero for non-support vectors).
    bias : float
        Offset of the decision function.
    support_indices : numpy.ndarray
        Indices of training points with ``alpha_i > 0``.
    C : float
        Box constraint used for training.
    alphas : numpy.ndarray
        Lagrange multipliers ``alpha_i``.
    n_iter : int
        Number of pair updates performed.
    """

    dual_coefficients: NDArray[np.float64] = field(repr=False)
    bias: float
    support_indices: NDArray[np.intp] = field(repr=False)
    C: float
    alphas: NDArray[np.float64] = field(repr=False)
    n_iter: int = 0

    def __repr__(self) -> str:
        """Return a short string representation."""
        return (
            f"SvmModel(C={self.C}, n_support={len(self.support_indices)}, "
            f"bias={self.bias:.6g}, n_iter={self.n_iter})"
        )


def to_signed(labels: ArrayLike) -> NDArray[np.int64]:
    """
    Map ``{0, 1}`` labels to ``{-1, +1}``; ``{-1, +1}`` labels pass through.

    Examples
    --------
    >>> to_signed([0, 1, 1]).tolist()
    [-1, 1, 1]
    """
    y = np.asarray(labels).reshape(-1)
    values = set(np.unique(y).tolist())
    if values <= {-1, 1}:
        return y.astype(np.int64)
    if values <= {0, 1}:
        return np.where(y == 1, 1, -1).astype(np.int64)
    raise ValueError(f"Labels must be in {{0, 1}} or {{-1, +1}}, got {sorted(values)}.")


def _gram_values(G: GramMatrix | ArrayLike) -> NDArray[np.float64]:
    values = G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError(f"Gram matrix must be square, got shape {values.shape}.")
    return values


def dual_objective(alphas: ArrayLike, G: GramMatrix | ArrayLike, y: ArrayLike) -> float:
    """Value of the SVM dual objective at ``alphas``."""
    a = np.asarray(alphas, dtype=np.float64)
    ys = to_signed(y)
    ay = a * ys
    return float(a.sum() - 0.5 * ay @ _gram_values(G) @ ay)


def _snap_to_bounds(alpha: float, C: float) -> float:
    eps = _BOUND_EPS * C
    if alpha <= eps:
        return 0.0
    if alpha >= C - eps:
        return float(C)
    return alpha


def train(
    G: GramMatrix | ArrayLike,
    y: ArrayLike,
    C: float,
    tol: float = 1e-3,
    max_iter: int | None = None,
) -> SvmModel:
    """
    Train a C-SVM on a precomputed Gram matrix with SMO.

    Parameters
    ----------
    G : GramMatrix or array_like
        Symmetric ``n x n`` training kernel.
    y : array_like
        Labels in ``{0, 1}`` or ``{-1, +1}``.
    C : float
        Box constraint, ``> 0``.
    tol : float, default=1e-3
        Stopping tolerance on the maximal KKT violation.
    max_iter : int, optional
        Cap on pair updates, defaults to ``10 * n * n``.

    Returns
    -------
    SvmModel

    Raises
    ------
    DegenerateProblemError
        If only one class is present.

    Warns
    -----
    RuntimeWarning
        If the iteration cap is reached before convergence.

    Examples
    --------
    >>> model = train(np.eye(2), [1, 0], C=10.0)
    >>> model.support_indices.tolist()
    [0, 1]
    """
    K = _gram_values(G)
    ys = to_signed(y).astype(np.float64)
    n = K.shape[0]
    if ys.shape[0] != n:
        raise DimensionError(f"Got {ys.shape[0]} labels for a {n}x{n} Gram matrix.")
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}.")
    if np.unique(ys).size < 2:
        raise DegenerateProblemError("Training labels contain a single class.")
    max_iter = 10 * n * n if max_iter is None else max_iter

    alphas = np.zeros(n)
    # E_t = sum_s alpha_s y_s K_st - y_t (bias excluded)
    errors = -ys.copy()
    diag = np.diag(K)
    positive = ys > 0
    n_iter = 0
    converged = False
    stalled = False

    while n_iter < max_iter:
        up = (positive & (alphas < C)) | (~positive & (alphas > 0))
        low = (positive & (alphas > 0)) | (~positive & (alphas < C))
        i = int(np.flatnonzero(up)[np.argmin(errors[up])])
        j = int(np.flatnonzero(low)[np.argmax(errors[low])])
        if errors[j] - errors[i] < tol:
            converged = True
            break

        yi, yj = ys[i], ys[j]
        ai, aj = alphas[i], alphas[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        eta = max(eta, _TAU)
        aj_new = float(np.clip(aj + yj * (errors[i] - errors[j]) / eta, lo, hi))
        ai_new = float(np.clip(ai + yi * yj * (aj - aj_new), 0.0, C))
        ai_new, aj_new = _snap_to_bounds(ai_new, C), _snap_to_bounds(aj_new, C)

        delta_i, delta_j = ai_new - ai, aj_new - aj
        if delta_i == 0.0 and delta_j == 0.0:
            stalled = True
            break
        alphas[i], alphas[j] = ai_new, aj_new
        errors += delta_i * yi * K[:, i] + delta_j * yj * K[:, j]
        n_iter += 1

    if stalled:
        warnings.warn(
            f"SMO made no progress on pair ({i}, {j}) with violation "
            f"{errors[j] - errors[i]:.3g} (C={C}).",
            RuntimeWarning,
            stacklevel=2,
        )
    elif not converged:
        warnings.warn(
            f"SMO reached max_iter={max_iter} before convergence (C={C}).",
            RuntimeWarning,
            stacklevel=2,
        )

    free = (alphas > 0) & (alphas < C)
    if np.any(free):
        bias = float(-np.mean(errors[free]))
    else:
        up = (positive & (alphas < C)) | (~positive & (alphas > 0))
        low = (positive & (alphas > 0)) | (~positive & (alphas < C))
        bias = float(-(errors[up].min() + errors[low].max()) / 2)

    support = np.flatnonzero(alphas > 0)
    logger.debug(
        "SMO finished: n=%d C=%g iterations=%d support=%d", n, C, n_iter, support.size
    )
    return SvmModel(
        dual_coefficients=alphas * ys,
        bias=bias,
        support_indices=support,
        C=float(C),
        alphas=alphas,
        n_iter=n_iter,
    )


def decision_function(model: SvmModel, kernel_rows: ArrayLike) -> NDArray[np.float64]:
    """
    Evaluate ``sum_i dual_i k(x_i, x) + bias`` for each kernel row.

    Parameters
    ----------
    model : SvmModel
        Trained model.
    kernel_rows : array_like
        One row (length ``n_train``) or a matrix of rows.
    """
    rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
    if rows.shape[1] != model.dual_coefficients.shape[0]:
        raise DimensionError(
            f"Kernel rows have length {rows.shape[1]}, model expects "
            f"{model.dual_coefficients.shape[0]}."
        )
    return rows @ model.dual_coefficients + model.bias


def predict(model: SvmModel, kernel_rows: ArrayLike) -> NDArray[np.int64] | int:
    """
    Predict ``{-1, +1}`` labels; a decision value of exactly 0 maps to ``+1``.

    A single 1-D row returns an ``int``, a matrix of rows returns an array.
    """
    single = np.ndim(kernel_rows) == 1
    values = decision_function(model, kernel_rows)
    labels = np.where(values >= 0, 1, -1).astype(np.int64)
    return int(labels[0]) if single else labels


def accuracy(pred: ArrayLike, truth: ArrayLike) -> float:
    """
    Fraction of matching labels (either label convention).

    Examples
    --------
    >>> accuracy([1, -1, 1], [1, 0, 0])
    0.6666666666666666
    """
    p, t = to_signed(pred), to_signed(truth)
    if p.shape != t.shape:
        raise DimensionError(f"Prediction and truth lengths differ: {p.shape} vs {t.shape}.")
    if p.size == 0:
        raise ValueError("accuracy: no labels given.")
    return float(np.mean(p == t))


def stratified_folds(
    y: ArrayLike, folds: int = 5, seed: int = 0
) -> list[tuple[NDArray[np.intp], NDArray[np.intp]]]:
    """Return ``(train_idx, test_idx)`` pairs of a shuffled stratified k-fold split."""
    labels = np.asarray(y).reshape(-1)
    if labels.shape[0] < folds:
        raise ValueError(f"Need at least {folds} samples for {folds}-fold CV, got {labels.shape[0]}.")
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(splitter.split(np.zeros((labels.shape[0], 1)), labels))


def _fold_accuracy(
    K: NDArray[np.float64],
    y: NDArray[np.int64],
    train_idx: NDArray[np.intp],
    test_idx: NDArray[np.intp],
    C: float,
    tol: float,
) -> float:
    model = train(K[np.ix_(train_idx, train_idx)], y[train_idx], C, tol=tol)
    pred = predict(model, K[np.ix_(test_idx, train_idx)])
    return accuracy(pred, y[test_idx])


def cross_validate(
    G: GramMatrix | ArrayLike,
    y: ArrayLike,
    C: float,
    folds: int = 5,
    seed: int = 0,
    tol: float = 1e-3,
    n_jobs: int | None = 1,
) -> float:
    """
    Mean accuracy of stratified k-fold cross-validation on a precomputed kernel.

    Gram sub-blocks are indexed from ``G``, never recomputed.

    Parameters
    ----------
    G : GramMatrix or array_like
        Kernel over all points.
    y : array_like
        Labels.
    C : float
        Box constraint.
    folds : int, default=5
        Number of folds.
    seed : int, default=0
        Shuffling seed of the folds.
    tol : float, default=1e-3
        SMO tolerance.
    n_jobs : int, optional
        Folds trained in parallel.

    Returns
    -------
    float
        Mean fold accuracy.
    """
    K = _gram_values(G)
    ys = to_signed(y)
    splits = stratified_folds(ys, folds=folds, seed=seed)
    if n_jobs in (None, 1):
        scores = [_fold_accuracy(K, ys, tr, te, C, tol) for tr, te in splits]
    else:
        scores = list(
            Parallel(n_jobs=n_jobs)(
                delayed(_fold_accuracy)(K, ys, tr, te, C, tol) for tr, te in splits
            )
        )
    return float(np.mean(scores))


__all__ = [
    "SvmModel",
    "accuracy",
    "cross_validate",
    "decision_function",
    "dual_objective",
    "predict",
    "stratified_folds",
    "to_signed",
    "train",
]
