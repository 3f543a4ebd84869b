"""
Dataset ingestion and preprocessing.

Raw CSV files are turned into small, balanced, z-scored binary classification
problems by :func:`preprocess`, which runs these stages in order:

1. ``missing``: drop rows with a missing or non-finite feature.
2. ``duplicates``: drop exact duplicate rows (features and label).
3. ``balance``: undersample the majority class with a seeded RNG.
4. ``variance``: drop features with variance below the threshold.
5. ``normalize``: z-score every feature.
6. ``correlation``: optionally drop features strongly correlated with an
   earlier kept feature.
7. ``ranking``: rank features by ANOVA F-value and keep the best ones.
8. ``subsample``: stratified, seeded subsample down to the target size.

When stage 8 removes points the z-scores are recomputed on the retained
points, so the output always has per-feature mean 0 and variance 1.
"""

from __future__ import annotations

import itertools
import logging
import os
import warnings
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from sklearn.feature_selection import f_classif
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from ._base_component import ParamsComponent
from .exceptions import DimensionError, PipelineError
from .utils.io import atomic_write_frame

logger = logging.getLogger("pyqkernel")

#: Label column of canonical dataset files.
LABEL_COLUMN = "label"

STAGES = (
    "missing",
    "duplicates",
    "balance",
    "variance",
    "normalize",
    "correlation",
    "ranking",
    "subsample",
)


def _readonly(array: NDArray) -> NDArray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Binary classification dataset.

    Parameters
    ----------
    X : numpy.ndarray
        ``n x D`` feature matrix. Raw datasets may contain ``nan``.
    y : numpy.ndarray
        ``n`` labels in ``{0, 1}``.
    feature_names : tuple of str
        One name per column of ``X``.
    dataset_id : str
        Identifier used in result records and output paths.
    index : numpy.ndarray, optional
        Row positions in the originating file, kept through every stage.

    Examples
    --------
    >>> ds = Dataset(np.zeros((2, 1)), [0, 1], ("a",), "demo")
    >>> ds
    Dataset(dataset_id='demo', n_points=2, n_features=1, classes=(1, 1))
    """

    X: NDArray[np.float64] = field(repr=False)
    y: NDArray[np.int64] = field(repr=False)
    feature_names: tuple[str, ...]
    dataset_id: str
    index: NDArray[np.int64] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        """Validate shapes and freeze the arrays."""
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"Dataset: X must be 2-D, got shape {X.shape}.")
        y = np.asarray(self.y).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise DimensionError(
                f"Dataset: {y.shape[0]} labels for {X.shape[0]} rows."
            )
        if y.size and not set(np.unique(y).tolist()) <= {0, 1}:
            raise ValueError("Dataset: labels must be in {0, 1}.")
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != X.shape[1]:
            raise DimensionError(
                f"Dataset: {len(names)} feature names for {X.shape[1]} columns."
            )
        index = np.arange(X.shape[0]) if self.index is None else np.asarray(self.index)
        if index.shape != (X.shape[0],):
            raise DimensionError("Dataset: index length must equal the number of rows.")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y.astype(np.int64)))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "index", _readonly(index.astype(np.int64)))

    def __eq__(self, other: object) -> bool:
        """Compare ids, feature names and array contents."""
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.dataset_id == other.dataset_id  # type: ignore[attr-defined]
            and self.feature_names == other.feature_names  # type: ignore[attr-defined]
            and np.array_equal(self.X, other.X, equal_nan=True)  # type: ignore[attr-defined]
            and np.array_equal(self.y, other.y)  # type: ignore[attr-defined]
            and np.array_equal(self.index, other.index)  # type: ignore[attr-defined]
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_points(self) -> int:
        """Number of rows."""
        return int(self.X.shape[0])

    @property
    def n_features(self) -> int:
        """Number of feature columns."""
        return int(self.X.shape[1])

    @property
    def class_counts(self) -> tuple[int, int]:
        """Number of points labelled 0 and 1."""
        ones = int(self.y.sum())
        return (self.n_points - ones, ones)

    @property
    def is_complete(self) -> bool:
        """Whether every feature value is finite."""
        return bool(np.all(np.isfinite(self.X)))

    def take(self, rows: ArrayLike) -> Dataset:
        """Return the subset of rows at the given positions."""
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            self.X[rows], self.y[rows], self.feature_names, self.dataset_id, self.index[rows]
        )

    def select_features(self, columns: Sequence[int]) -> Dataset:
        """Return the dataset restricted to ``columns`` (in the given order)."""
        cols = list(columns)
        return Dataset(
            self.X[:, cols],
            self.y,
            tuple(self.feature_names[c] for c in cols),
            self.dataset_id,
            self.index,
        )

    def with_labels(self, labels: ArrayLike) -> Dataset:
        """Return a copy carrying new labels."""
        return Dataset(self.X, labels, self.feature_names, self.dataset_id, self.index)

    def to_frame(self) -> pd.DataFrame:
        """Features and the ``label`` column as a DataFrame."""
        frame = pd.DataFrame(self.X, columns=list(self.feature_names))
        frame[LABEL_COLUMN] = self.y
        return frame

    def __repr__(self) -> str:
        """Return a short string representation."""
        return (
            f"Dataset(dataset_id='{self.dataset_id}', n_points={self.n_points}, "
            f"n_features={self.n_features}, classes={self.class_counts})"
        )


class PreprocessParams(ParamsComponent):
    """
    Settings of :func:`preprocess`.

    Parameters
    ----------
    target_features : int, default=5
        Number of top-ranked features kept.
    target_points : int, default=200
        Maximum number of points kept.
    drop_correlated : float, optional
        Absolute Pearson correlation above which a later feature is dropped.
    variance_threshold : float, default=1e-3
        Features with a smaller variance are dropped.

    Examples
    --------
    >>> PreprocessParams(drop_correlated=0.75)
    PreprocessParams(target_features=5, target_points=200, drop_correlated=0.75, variance_threshold=0.001)
    """

    def __init__(
        self,
        target_features: int = 5,
        target_points: int = 200,
        drop_correlated: float | None = None,
        variance_threshold: float = 1e-3,
    ):
        self.target_features = target_features
        self.target_points = target_points
        self.drop_correlated = drop_correlated
        self.variance_threshold = variance_threshold

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the preprocessing settings.

        Raises
        ------
        ValueError
            If a target is < 1, the correlation threshold is outside (0, 1]
            or the variance threshold is negative.
        """
        if self.target_features < 1:
            raise ValueError(
                f"PreprocessParams: target_features must be >= 1, got {self.target_features}."
            )
        if self.target_points < 2:
            raise ValueError(
                f"PreprocessParams: target_points must be >= 2, got {self.target_points}."
            )
        if self.drop_correlated is not None and not 0 < self.drop_correlated <= 1:
            raise ValueError(
                f"PreprocessParams: drop_correlated must be in (0, 1], got {self.drop_correlated}."
            )
        if self.variance_threshold < 0:
            raise ValueError(
                f"PreprocessParams: variance_threshold must be >= 0, got {self.variance_threshold}."
            )


def _label_matches(labels: pd.Series, value: object) -> NDArray[np.bool_]:
    """Compare labels numerically when both sides are numbers, else as text."""
    numeric = pd.to_numeric(labels, errors="coerce")
    try:
        number = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        number = None
    if number is not None and numeric.notna().all():
        return (numeric == number).to_numpy()
    return (labels.astype(str) == str(value)).to_numpy()


def load_csv(
    path: str | os.PathLike[str],
    label_column: str,
    classes: Sequence[object] | None = None,
    dataset_id: str | None = None,
) -> Dataset:
    """
    Read a raw dataset from a CSV file with a header row.

    Parameters
    ----------
    path : str or PathLike
        CSV file.
    label_column : str
        Name of the label column; all other columns are features.
    classes : sequence of two values, optional
        Keep only rows with these label values; the first maps to 0, the
        second to 1. Without it the file must hold exactly two label values,
        mapped in sorted order.
    dataset_id : str, optional
        Defaults to the file stem.

    Returns
    -------
    Dataset
        Raw dataset; missing feature cells are kept as ``nan``.

    Raises
    ------
    ValueError
        On duplicate header names, a missing label column, an unparsable
        feature cell, or labels that are not binary.
    """
    path = Path(path)
    header = pd.read_csv(path, header=None, nrows=1, dtype=str).iloc[0].tolist()
    duplicates = sorted({name for name in header if header.count(name) > 1})
    if duplicates:
        raise ValueError(f"{path.name}: duplicate header names {duplicates}.")
    frame = pd.read_csv(path)
    if label_column not in frame.columns:
        raise ValueError(
            f"{path.name}: label column '{label_column}' not found in {list(frame.columns)}."
        )

    unlabeled = frame[label_column].isna()
    if unlabeled.any():
        logger.warning("%s: dropping %d rows without a label", path.name, int(unlabeled.sum()))
        frame = frame.loc[~unlabeled]
    labels = frame[label_column]

    if classes is not None:
        if len(classes) != 2:
            raise ValueError(f"classes must hold two label values, got {list(classes)}.")
        first, second = (_label_matches(labels, c) for c in classes)
        keep = first | second
        frame, labels = frame.loc[keep], labels.loc[keep]
        y = second[keep].astype(np.int64)
    else:
        values = sorted(pd.unique(labels).tolist(), key=str)
        if len(values) != 2:
            raise ValueError(
                f"{path.name}: expected 2 label values, found {len(values)}; pass classes=."
            )
        if all(isinstance(v, int | float | np.number) for v in values):
            values = sorted(values)
        y = _label_matches(labels, values[1]).astype(np.int64)

    feature_frame = frame.drop(columns=[label_column])
    columns = {}
    for name in feature_frame.columns:
        column = feature_frame[name]
        parsed = pd.to_numeric(column, errors="coerce")
        bad = parsed.isna() & column.notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ValueError(
                f"{path.name}: unparsable value {column.iloc[row]!r} in column '{name}'."
            )
        columns[name] = parsed.astype(np.float64)
    X = pd.DataFrame(columns, index=feature_frame.index).to_numpy(dtype=np.float64)

    ds = Dataset(
        X,
        y,
        tuple(str(c) for c in feature_frame.columns),
        dataset_id or path.stem,
        frame.index.to_numpy(),
    )
    logger.info("Loaded %r from %s", ds, path)
    return ds


def load_canonical(
    path: str | os.PathLike[str], dataset_id: str | None = None
) -> Dataset:
    """Read a file written by :func:`write_csv` (``label`` column, finite features)."""
    path = Path(path)
    frame = pd.read_csv(path)
    if LABEL_COLUMN not in frame.columns:
        raise ValueError(f"{path.name}: canonical files need a '{LABEL_COLUMN}' column.")
    X = frame.drop(columns=[LABEL_COLUMN]).to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{path.name}: canonical files must not contain missing values.")
    return Dataset(
        X,
        frame[LABEL_COLUMN].to_numpy(dtype=np.int64),
        tuple(c for c in frame.columns if c != LABEL_COLUMN),
        dataset_id or path.stem,
    )


def write_csv(ds: Dataset, path: str | os.PathLike[str]) -> Path:
    """Write the canonical dataset file (features then ``label``)."""
    return atomic_write_frame(ds.to_frame(), path)


def anova_f(column: ArrayLike, labels: ArrayLike) -> float:
    """
    One-way ANOVA F-value of a single feature between the two classes.

    ``F`` is the between-group mean square divided by the within-group mean
    square. A zero within-group variance yields ``inf`` when the class means
    differ and ``0.0`` when the column is constant.

    Raises
    ------
    ValueError
        If a class has fewer than 2 samples.

    Examples
    --------
    >>> anova_f([0.0, 2.0, 3.0, 5.0], [0, 0, 1, 1])
    4.5
    >>> anova_f([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1])
    inf
    """
    x = np.asarray(column, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(labels).reshape(-1)
    counts = np.bincount(y.astype(np.int64), minlength=2)
    if counts.size != 2 or counts.min() < 2:
        raise ValueError(f"anova_f: each class needs >= 2 samples, got {counts.tolist()}.")
    return float(_f_values(x, y)[0])


def _f_values(X: NDArray[np.float64], y: NDArray) -> NDArray[np.float64]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f_values, _ = f_classif(X, y)
    return np.nan_to_num(f_values, nan=0.0, posinf=np.inf)


def _stage_result(stage: str, rows: int, columns: int) -> None:
    if rows == 0 or columns == 0:
        raise PipelineError(stage, f"no data left ({rows} rows, {columns} features).")
    logger.debug("preprocess[%s]: %d rows, %d features", stage, rows, columns)


def _balance(y: NDArray[np.int64], rng: np.random.Generator) -> NDArray[np.intp]:
    counts = np.bincount(y, minlength=2)
    keep = []
    for label in (0, 1):
        members = np.flatnonzero(y == label)
        if members.size > counts.min():
            members = np.sort(rng.choice(members, size=counts.min(), replace=False))
        keep.append(members)
    return np.sort(np.concatenate(keep))


def _zscore(X: NDArray[np.float64]) -> NDArray[np.float64]:
    return StandardScaler().fit_transform(X)


def preprocess(
    raw: Dataset,
    target_features: int = 5,
    target_points: int = 200,
    seed: int = 0,
    drop_correlated: float | None = None,
    variance_threshold: float = 1e-3,
) -> Dataset:
    """
    Turn a raw dataset into a balanced, normalized, reduced problem.

    Parameters
    ----------
    raw : Dataset
        Output of :func:`load_csv`.
    target_features : int, default=5
        Features kept after ANOVA ranking.
    target_points : int, default=200
        Points kept after the stratified subsample, rounded down to an even
        number so the classes stay balanced.
    seed : int, default=0
        Seed of the balancing and subsampling draws.
    drop_correlated : float, optional
        Correlation threshold of the optional correlation filter.
    variance_threshold : float, default=1e-3
        Minimum feature variance.

    Returns
    -------
    Dataset
        Finite, balanced dataset whose features are sorted by decreasing
        F-value.

    Raises
    ------
    PipelineError
        If a stage leaves no rows or no features, or fewer than two classes
        reach the balancing stage.

    Examples
    --------
    >>> from pyqkernel.datasets import make_toy_dataset
    >>> ds = preprocess(make_toy_dataset(n_points=60, seed=1), target_points=40)
    >>> ds.n_points, ds.n_features, ds.class_counts
    (40, 5, (20, 20))
    """
    params = PreprocessParams(
        target_features, target_points, drop_correlated, variance_threshold
    )
    ds = raw

    complete = np.all(np.isfinite(ds.X), axis=1)
    ds = ds.take(np.flatnonzero(complete))
    _stage_result("missing", ds.n_points, ds.n_features)

    duplicated = ds.to_frame().duplicated(keep="first").to_numpy()
    ds = ds.take(np.flatnonzero(~duplicated))
    _stage_result("duplicates", ds.n_points, ds.n_features)

    if min(ds.class_counts) == 0:
        raise PipelineError("balance", "a single class is present.")
    rng = np.random.default_rng(seed)
    ds = ds.take(_balance(ds.y, rng))
    _stage_result("balance", ds.n_points, ds.n_features)

    variances = np.var(ds.X, axis=0)
    ds = ds.select_features(np.flatnonzero(variances >= params.variance_threshold))
    _stage_result("variance", ds.n_points, ds.n_features)

    ds = Dataset(_zscore(ds.X), ds.y, ds.feature_names, ds.dataset_id, ds.index)
    _stage_result("normalize", ds.n_points, ds.n_features)

    if params.drop_correlated is not None and ds.n_features > 1:
        correlation = np.abs(np.corrcoef(ds.X, rowvar=False))
        kept: list[int] = []
        for j in range(ds.n_features):
            if all(correlation[i, j] <= params.drop_correlated for i in kept):
                kept.append(j)
        ds = ds.select_features(kept)
        _stage_result("correlation", ds.n_points, ds.n_features)

    order = np.argsort(-_f_values(ds.X, ds.y), kind="stable")
    ds = ds.select_features(order[: params.target_features])
    _stage_result("ranking", ds.n_points, ds.n_features)

    # an odd target rounds down so both classes keep the same size
    n_keep = 2 * (params.target_points // 2)
    if ds.n_points > n_keep:
        rows, _ = train_test_split(
            np.arange(ds.n_points),
            train_size=n_keep,
            stratify=ds.y,
            random_state=seed,
        )
        ds = ds.take(np.sort(rows))
        ds = Dataset(_zscore(ds.X), ds.y, ds.feature_names, ds.dataset_id, ds.index)
        _stage_result("subsample", ds.n_points, ds.n_features)

    logger.info("Preprocessed %s -> %r", raw.dataset_id, ds)
    return ds


def split(
    ds: Dataset, train_fraction: float = 2 / 3, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """
    Stratified, seeded train/test split.

    Both parts keep the original row order.

    Examples
    --------
    >>> ds = Dataset(np.arange(12.0).reshape(6, 2), [0, 0, 0, 1, 1, 1], ("a", "b"), "d")
    >>> train, test = split(ds, seed=0)
    >>> train.n_points, test.n_points
    (4, 2)
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}.")
    n_train = round(train_fraction * ds.n_points)
    train_rows, test_rows = train_test_split(
        np.arange(ds.n_points),
        train_size=n_train,
        stratify=ds.y,
        random_state=seed,
    )
    return ds.take(np.sort(train_rows)), ds.take(np.sort(test_rows))


def permute_features(ds: Dataset, permutation: Sequence[int]) -> Dataset:
    """
    Reorder the feature columns; column ``i`` of the result is ``permutation[i]``.

    Raises
    ------
    ValueError
        If ``permutation`` is not a bijection on the feature indices.
    """
    perm = [int(p) for p in permutation]
    if sorted(perm) != list(range(ds.n_features)):
        raise ValueError(
            f"permute_features: {perm} is not a permutation of {ds.n_features} features."
        )
    return ds.select_features(perm)


def feature_permutations(ds: Dataset) -> Iterator[tuple[tuple[int, ...], Dataset]]:
    """Yield ``(permutation, dataset)`` for all ``D!`` feature orderings."""
    for perm in itertools.permutations(range(ds.n_features)):
        yield perm, permute_features(ds, perm)


__all__ = [
    "LABEL_COLUMN",
    "STAGES",
    "Dataset",
    "PreprocessParams",
    "anova_f",
    "feature_permutations",
    "load_canonical",
    "load_csv",
    "permute_features",
    "preprocess",
    "split",
    "write_csv",
]
