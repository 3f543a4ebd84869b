"""
Analysis of sweep results.

Works on lists of :class:`~pyqkernel.sweep.ResultRecord` (or the equivalent
DataFrame) and produces plot-ready tables: marginal curves, gradient-boosted
tree (Gini) importances, GD outlier trimming and the data-scaling diagnostic.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray
from sklearn.ensemble import GradientBoostingRegressor

from ._base_component import ParamsComponent
from .data import Dataset
from .sweep import ResultRecord
from .sweep import records_to_frame as _records_frame
from .utils.csv_config import ANALYSIS_COLUMNS, GD_KINDS, SCALING_COLUMNS
from .utils.io import atomic_write_frame

logger = logging.getLogger("pyqkernel")

HYPERPARAMETERS: tuple[str, ...] = ("basis", "t", "T", "gamma", "K", "C")
LOG_SCALED: tuple[str, ...] = ("t", "T", "gamma", "C")
GD_METRICS: tuple[str, ...] = tuple(f"gd_{kind}" for kind in GD_KINDS)
METRICS: tuple[str, ...] = ("acc_test", "acc_cv", *GD_METRICS)

#: Columns that identify a setting apart from the dataset.
_SETTING_COLUMNS = ("basis", "t", "T", "gamma", "K", "C", "seed", "alpha_mode")
#: Separator between a dataset id and a feature permutation tag.
PERMUTATION_SEPARATOR = "@"


class AnalysisParams(ParamsComponent):
    """
    Settings of the analysis command.

    Parameters
    ----------
    results : sequence of str, optional
        Result CSV files to analyze.
    metrics : sequence of str, optional
        Metrics to tabulate, defaults to all of them.
    hyperparameters : sequence of str, optional
        Hyperparameters of the marginals and the importance fit.
    trim_datasets : sequence of str, optional
        Datasets whose GD outliers are removed first.
    trim_fraction : float, default=0.03
        Share of records trimmed per GD column.

    Examples
    --------
    >>> AnalysisParams(metrics=["acc_test"]).metrics
    ('acc_test',)
    """

    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset(
        {"results", "metrics", "hyperparameters", "trim_datasets"}
    )

    def __init__(
        self,
        results: Sequence[str] = (),
        metrics: Sequence[str] | None = None,
        hyperparameters: Sequence[str] | None = None,
        trim_datasets: Sequence[str] = (),
        trim_fraction: float = 0.03,
    ):
        self.results = results
        self.metrics = METRICS if metrics is None else metrics
        self.hyperparameters = HYPERPARAMETERS if hyperparameters is None else hyperparameters
        self.trim_datasets = trim_datasets
        self.trim_fraction = trim_fraction

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate metric and hyperparameter names and the trim fraction.

        Raises
        ------
        ValueError
            If a name is unknown or trim_fraction is outside [0, 1).
        """
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown or not self.metrics:
            raise ValueError(f"AnalysisParams: metrics must be a subset of {METRICS}, got {unknown}.")
        unknown = [h for h in self.hyperparameters if h not in HYPERPARAMETERS]
        if unknown or not self.hyperparameters:
            raise ValueError(
                f"AnalysisParams: hyperparameters must be a subset of {HYPERPARAMETERS}, got {unknown}."
            )
        if not 0 <= self.trim_fraction < 1:
            raise ValueError(
                f"AnalysisParams: trim_fraction must be in [0, 1), got {self.trim_fraction}."
            )


# GBDT settings of the importance fit.
GBDT_PARAMS: dict[str, Any] = {
    "n_estimators": 100,
    "max_depth": 3,
    "learning_rate": 0.1,
    "loss": "squared_error",
    "subsample": 1.0,
}


@dataclass(frozen=True)
class MarginalCurve:
    """
    Mean and spread of a metric for each value of one hyperparameter.

    Parameters
    ----------
    hyperparameter : str
        Grouping column.
    metric : str
        Averaged column.
    values : tuple
        Distinct hyperparameter values, sorted.
    mean, std : numpy.ndarray
        Mean and population standard deviation per value (finite metric values only).
    count : numpy.ndarray
        Number of finite metric values per value.
    n_nonfinite : int
        Number of records excluded because their metric was not finite.
    """

    hyperparameter: str
    metric: str
    values: tuple[Any, ...]
    mean: NDArray[np.float64] = field(repr=False)
    std: NDArray[np.float64] = field(repr=False)
    count: NDArray[np.int64] = field(repr=False)
    n_nonfinite: int = 0

    def to_frame(self) -> pd.DataFrame:
        """Curve as a table with the ``marginal`` schema."""
        return pd.DataFrame(
            {
                "value": list(self.values),
                "mean": self.mean,
                "std": self.std,
                "count": self.count,
                "n_nonfinite": self.n_nonfinite,
            },
            columns=list(ANALYSIS_COLUMNS["marginal"]),
        )


@dataclass(frozen=True)
class ImportanceReport:
    """
    Normalized Gini importance of each hyperparameter for one metric.

    ``degenerate`` is set when the metric had fewer than two distinct finite
    values; the importances are then uniform.
    """

    importances: dict[str, float]
    metric: str
    dataset_id: str
    degenerate: bool = False
    n_records: int = 0

    def to_frame(self) -> pd.DataFrame:
        """One row per hyperparameter."""
        return pd.DataFrame(
            {
                "hyperparameter": list(self.importances),
                "importance": list(self.importances.values()),
            }
        )


def records_to_frame(records: Iterable[ResultRecord] | pd.DataFrame) -> pd.DataFrame:
    """Return records as a DataFrame (a DataFrame input is copied with a fresh index)."""
    if isinstance(records, pd.DataFrame):
        return records.reset_index(drop=True)
    return _records_frame(records, ResultRecord)


def _check_columns(frame: pd.DataFrame, *names: str) -> None:
    if frame.empty:
        raise ValueError("No records to analyze.")
    unknown = [n for n in names if n not in frame.columns]
    if unknown:
        raise ValueError(f"Unknown field names {unknown}.")


def scale_unit(values: ArrayLike) -> NDArray[np.float64]:
    """
    Divide by the maximum so the largest value becomes 1.

    Non-finite entries are ignored for the maximum and passed through.

    Raises
    ------
    ValueError
        If the maximum is not positive.

    Examples
    --------
    >>> scale_unit([1.0, 2.0, 4.0])
    array([0.25, 0.5 , 1.  ])
    """
    array = np.asarray(values, dtype=np.float64)
    finite = array[np.isfinite(array)]
    if finite.size == 0 or finite.max() <= 0:
        raise ValueError("scale_unit: maximum must be positive.")
    return array / finite.max()


def _unit_scale_per_dataset(frame: pd.DataFrame, metric: str) -> pd.DataFrame:
    frame = frame.copy()
    for _, rows in frame.groupby("dataset_id", sort=True):
        values = rows[metric].to_numpy(dtype=np.float64)
        if np.any(np.isfinite(values) & (values > 0)):
            frame.loc[rows.index, metric] = scale_unit(values)
    return frame


def _finite(frame: pd.DataFrame, metric: str) -> tuple[pd.DataFrame, int]:
    values = pd.to_numeric(frame[metric], errors="coerce").to_numpy(dtype=np.float64)
    mask = np.isfinite(values)
    return frame.loc[mask], int((~mask).sum())


def marginal(
    records: Iterable[ResultRecord] | pd.DataFrame,
    hyperparameter: str,
    metric: str,
    unit_scale: bool = False,
) -> MarginalCurve:
    """
    Average a metric over everything except one hyperparameter.

    Parameters
    ----------
    records : list of ResultRecord or pandas.DataFrame
        Sweep results, possibly of several datasets.
    hyperparameter : str
        Column to group by (e.g. ``"t"``).
    metric : str
        Column to average (e.g. ``"acc_test"``).
    unit_scale : bool, default=False
        Divide the metric by its per-dataset maximum first (for GD metrics
        pooled over datasets).

    Returns
    -------
    MarginalCurve
        Non-finite metric values are excluded and counted.

    Raises
    ------
    ValueError
        If there are no records or a field name is unknown.

    Examples
    --------
    >>> frame = pd.DataFrame({"t": [1.0, 1.0, 2.0], "acc_test": [0.5, 0.7, 0.9]})
    >>> curve = marginal(frame, "t", "acc_test")
    >>> curve.values, curve.mean.round(6).tolist()
    ((1.0, 2.0), [0.6, 0.9])
    """
    frame = records_to_frame(records)
    _check_columns(frame, hyperparameter, metric, *(("dataset_id",) if unit_scale else ()))
    if unit_scale:
        frame = _unit_scale_per_dataset(frame, metric)
    values = tuple(sorted(pd.unique(frame[hyperparameter]).tolist()))
    finite, n_nonfinite = _finite(frame, metric)
    grouped = finite.groupby(hyperparameter, sort=True)[metric]
    stats = pd.DataFrame(
        {
            "mean": grouped.mean(),
            "std": grouped.agg(lambda s: float(np.std(s.to_numpy(dtype=np.float64)))),
            "count": grouped.size(),
        }
    ).reindex(list(values))
    if n_nonfinite:
        logger.debug("marginal(%s, %s): %d non-finite values excluded", hyperparameter, metric, n_nonfinite)
    return MarginalCurve(
        hyperparameter=hyperparameter,
        metric=metric,
        values=values,
        mean=stats["mean"].to_numpy(dtype=np.float64),
        std=stats["std"].to_numpy(dtype=np.float64),
        count=stats["count"].fillna(0).to_numpy(dtype=np.int64),
        n_nonfinite=n_nonfinite,
    )


def marginal_gamma_optimized(
    records: Iterable[ResultRecord] | pd.DataFrame, metric: str
) -> MarginalCurve:
    """
    Compare bases with the best gamma chosen in every setting.

    Within each group of records that share every column except ``gamma``, the
    maximum of ``metric`` is taken; the maxima are then averaged per basis.

    Examples
    --------
    >>> frame = pd.DataFrame({
    ...     "dataset_id": "d", "basis": ["distance"] * 2 + ["inner"], "t": 1.0, "T": 1,
    ...     "gamma": [0.1, 10.0, 0.0], "K": 1, "C": 1.0, "seed": 0, "alpha_mode": "mean",
    ...     "acc_test": [0.5, 0.9, 0.7]})
    >>> curve = marginal_gamma_optimized(frame, "acc_test")
    >>> dict(zip(curve.values, curve.mean.tolist()))
    {'distance': 0.9, 'inner': 0.7}
    """
    frame = records_to_frame(records)
    keys = ["dataset_id", *(c for c in _SETTING_COLUMNS if c != "gamma")]
    _check_columns(frame, metric, *keys)
    finite, n_nonfinite = _finite(frame, metric)
    best = finite.groupby(keys, sort=True, dropna=False)[metric].max().reset_index()
    curve = marginal(best, "basis", metric)
    return MarginalCurve(
        hyperparameter="basis",
        metric=metric,
        values=curve.values,
        mean=curve.mean,
        std=curve.std,
        count=curve.count,
        n_nonfinite=n_nonfinite,
    )


def trim_gd_outliers(
    records: Sequence[ResultRecord] | pd.DataFrame,
    fraction: float = 0.03,
    datasets: Iterable[str] | None = None,
    columns: Sequence[str] = GD_METRICS,
) -> Any:
    """
    Drop the records holding the largest GD values.

    For every dataset (or only the listed ones) and every GD column, the top
    ``floor(fraction * n)`` records are marked; the union of marked records is
    removed.

    Returns
    -------
    list of ResultRecord or pandas.DataFrame
        Same kind as ``records``, original order kept.

    Examples
    --------
    >>> frame = pd.DataFrame({"dataset_id": "d", "gd_rbf": np.arange(100.0)})
    >>> len(trim_gd_outliers(frame, 0.03, columns=["gd_rbf"]))
    97
    """
    if not 0 <= fraction < 1:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}.")
    as_frame = isinstance(records, pd.DataFrame)
    frame = records_to_frame(records).reset_index(drop=True)
    if frame.empty:
        return records
    selected = None if datasets is None else set(datasets)
    drop: set[int] = set()
    for dataset_id, rows in frame.groupby("dataset_id", sort=True):
        if selected is not None and dataset_id not in selected:
            continue
        n_trim = int(math.floor(fraction * len(rows) + 1e-9))
        if n_trim == 0:
            continue
        for column in columns:
            values = rows[column].astype(np.float64)
            ranked = values[values.notna()].sort_values(ascending=False, kind="stable")
            drop.update(ranked.index[:n_trim].tolist())
    keep = [i for i in range(len(frame)) if i not in drop]
    logger.info("Trimmed %d GD outlier records", len(drop))
    if as_frame:
        return records.iloc[keep]
    return [records[i] for i in keep]


def _design_matrix(frame: pd.DataFrame, hyperparameters: Sequence[str]) -> NDArray[np.float64]:
    columns = []
    for name in hyperparameters:
        if name == "basis":
            columns.append(pd.Categorical(frame[name], categories=sorted(frame[name].unique())).codes)
            continue
        values = frame[name].to_numpy(dtype=np.float64)
        if name in LOG_SCALED:
            positive = values[values > 0]
            floor = np.log10(positive.min()) - 1.0 if positive.size else 0.0
            with np.errstate(divide="ignore"):
                values = np.where(values > 0, np.log10(np.where(values > 0, values, 1.0)), floor)
        columns.append(values)
    return np.column_stack(columns).astype(np.float64)


def gini_importance(
    records: Iterable[ResultRecord] | pd.DataFrame,
    metric: str,
    hyperparameters: Sequence[str] = HYPERPARAMETERS,
    seed: int = 0,
) -> ImportanceReport:
    """
    Impurity-based importance of each hyperparameter for predicting a metric.

    Gradient-boosted regression trees (100 trees of depth 3, learning rate
    0.1) are fitted with the hyperparameters as features and the metric as
    target; the summed squared-error reductions per feature are normalized to
    sum to 1. ``t``, ``T``, ``gamma`` and ``C`` enter in log scale (the gamma
    placeholder of the inner bases maps below the smallest gamma) and the
    basis enters as category codes. Records are sorted before fitting, so the
    report does not depend on their order.

    Parameters
    ----------
    records : list of ResultRecord or pandas.DataFrame
        Results of one dataset (or pooled results).
    metric : str
        Target column.
    hyperparameters : sequence of str
        Feature columns.
    seed : int, default=0
        Random state of the tree ensemble.

    Returns
    -------
    ImportanceReport

    Warns
    -----
    UserWarning
        If the metric has fewer than two distinct finite values; the report is
        uniform and flagged as degenerate.
    """
    frame = records_to_frame(records)
    _check_columns(frame, metric, *hyperparameters)
    frame, _ = _finite(frame, metric)
    sort_columns = [c for c in ("dataset_id", *_SETTING_COLUMNS) if c in frame.columns]
    frame = frame.sort_values([*sort_columns, metric], kind="stable").reset_index(drop=True)
    dataset_id = (
        str(frame["dataset_id"].iloc[0])
        if "dataset_id" in frame.columns and frame["dataset_id"].nunique() == 1
        else "all"
    )
    target = frame[metric].to_numpy(dtype=np.float64)
    n = len(hyperparameters)
    if np.unique(target).size < 2:
        warnings.warn(
            f"Metric '{metric}' is constant; importance report is uniform.",
            UserWarning,
            stacklevel=2,
        )
        return ImportanceReport(
            {h: 1.0 / n for h in hyperparameters}, metric, dataset_id, True, len(frame)
        )
    model = GradientBoostingRegressor(random_state=seed, **GBDT_PARAMS)
    model.fit(_design_matrix(frame, hyperparameters), target)
    importances = np.asarray(model.feature_importances_, dtype=np.float64)
    total = importances.sum()
    if not total > 0:
        return ImportanceReport(
            {h: 1.0 / n for h in hyperparameters}, metric, dataset_id, True, len(frame)
        )
    importances = importances / total
    return ImportanceReport(
        dict(zip(hyperparameters, importances.tolist(), strict=True)),
        metric,
        dataset_id,
        False,
        len(frame),
    )


def importance_across_datasets(
    records: Iterable[ResultRecord] | pd.DataFrame,
    metric: str,
    hyperparameters: Sequence[str] = HYPERPARAMETERS,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Fit :func:`gini_importance` per dataset and aggregate.

    Returns
    -------
    pandas.DataFrame
        ``importance`` schema: mean and population std of each hyperparameter's
        importance over datasets, the number of datasets, and how many of them
        were degenerate.
    """
    frame = records_to_frame(records)
    _check_columns(frame, "dataset_id", metric)
    reports = []
    for _, rows in frame.groupby("dataset_id", sort=True):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            reports.append(gini_importance(rows, metric, hyperparameters, seed))
    matrix = np.array([[r.importances[h] for h in hyperparameters] for r in reports])
    return pd.DataFrame(
        {
            "hyperparameter": list(hyperparameters),
            "importance": matrix.mean(axis=0),
            "std": matrix.std(axis=0),
            "n_datasets": len(reports),
            "degenerate": sum(r.degenerate for r in reports),
        },
        columns=list(ANALYSIS_COLUMNS["importance"]),
    )


def scaled_feature_std(ds: Dataset, t: float) -> float:
    """
    Standard deviation over all entries of ``t * X``.

    Examples
    --------
    >>> ds = Dataset(np.array([[1.0], [-1.0]]), [0, 1], ("a",), "d")
    >>> scaled_feature_std(ds, 0.5)
    0.5
    """
    return float(np.std(t * ds.X))


def data_scaling(
    records: Iterable[ResultRecord] | pd.DataFrame,
    datasets: Mapping[str, Dataset],
    metric: str = "acc_test",
) -> pd.DataFrame:
    """
    Best-on-average ``t`` per dataset and basis with the resulting feature spread.

    For each ``(dataset, basis)`` the ``t`` with the highest mean metric
    (averaged over all other hyperparameters) is selected, and the standard
    deviation of the features scaled by it is reported.
    """
    frame = records_to_frame(records)
    _check_columns(frame, "dataset_id", "basis", "t", metric)
    rows = []
    for (dataset_id, basis), group in frame.groupby(["dataset_id", "basis"], sort=True):
        base_id = str(dataset_id).split(PERMUTATION_SEPARATOR)[0]
        ds = datasets.get(str(dataset_id), datasets.get(base_id))
        if ds is None:
            logger.warning("No dataset '%s' for the scaling table", dataset_id)
            continue
        curve = marginal(group, "t", metric)
        if not np.any(np.isfinite(curve.mean)):
            continue
        best = int(np.nanargmax(curve.mean))
        best_t = float(curve.values[best])
        rows.append(
            {
                "dataset_id": dataset_id,
                "basis": basis,
                "best_t": best_t,
                "scaled_std": scaled_feature_std(ds, best_t),
                "mean_metric": float(curve.mean[best]),
            }
        )
    return pd.DataFrame(rows, columns=list(SCALING_COLUMNS))


def permutation_spread(
    records: Iterable[ResultRecord] | pd.DataFrame, metric: str = "acc_test"
) -> pd.DataFrame:
    """
    Sensitivity of a metric to the order of the features.

    Records of permuted datasets carry ids ``"<dataset>@<permutation>"``. For
    each base dataset the population std of the metric across permutations is
    computed per setting and averaged over settings.
    """
    frame = records_to_frame(records)
    _check_columns(frame, "dataset_id", metric)
    frame, _ = _finite(frame, metric)
    ids = frame["dataset_id"].astype(str).str.split(PERMUTATION_SEPARATOR, n=1)
    frame = frame.assign(
        base_id=ids.str[0], permutation=ids.str[1].fillna("")
    )
    rows = []
    for base_id, group in frame.groupby("base_id", sort=True):
        spread = group.groupby(list(_SETTING_COLUMNS), sort=True, dropna=False)[metric].agg(
            lambda s: float(np.std(s.to_numpy(dtype=np.float64)))
        )
        rows.append(
            {
                "dataset_id": base_id,
                "mean_std": float(spread.mean()),
                "n_settings": len(spread),
                "n_permutations": group["permutation"].nunique(),
            }
        )
    return pd.DataFrame(rows, columns=["dataset_id", "mean_std", "n_settings", "n_permutations"])


def _metric_tables(
    frame: pd.DataFrame, metric: str, hyperparameters: Sequence[str], seed: int
) -> dict[str, pd.DataFrame]:
    unit = metric in GD_METRICS
    tables = {
        f"marginals_{h}_{metric}.csv": marginal(frame, h, metric, unit_scale=unit).to_frame()
        for h in hyperparameters
    }
    optimized = marginal_gamma_optimized(frame, metric)
    tables[f"marginals_basis-gamma-optimized_{metric}.csv"] = pd.DataFrame(
        {
            "basis": list(optimized.values),
            "mean": optimized.mean,
            "std": optimized.std,
            "count": optimized.count,
        },
        columns=list(ANALYSIS_COLUMNS["marginal_gamma_optimized"]),
    )
    tables[f"importance_{metric}.csv"] = importance_across_datasets(
        frame, metric, hyperparameters, seed
    )
    return tables


def export_analysis(
    records: Iterable[ResultRecord] | pd.DataFrame,
    outdir: str | os.PathLike[str],
    metrics: Sequence[str] = METRICS,
    hyperparameters: Sequence[str] = HYPERPARAMETERS,
    datasets: Mapping[str, Dataset] | None = None,
    trim_datasets: Iterable[str] = (),
    trim_fraction: float = 0.03,
    seed: int = 0,
    n_jobs: int | None = 1,
) -> list[Path]:
    """
    Write every analysis table to ``outdir``.

    GD outliers of the datasets in ``trim_datasets`` are removed first. Writes
    ``marginals_<param>_<metric>.csv``, the gamma-optimized basis comparison,
    ``importance_<metric>.csv`` and, when ``datasets`` is given, ``scaling.csv``.
    Metrics are processed in parallel over ``n_jobs`` workers.

    Returns
    -------
    list of Path
        Written files, sorted by name.

    Raises
    ------
    ValueError
        If there are no records or a metric is unknown.
    """
    frame = records_to_frame(records)
    if frame.empty:
        raise ValueError("No records to analyze.")
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ValueError(f"Unknown metrics {unknown}, expected a subset of {METRICS}.")
    trim = list(trim_datasets)
    if trim:
        frame = trim_gd_outliers(frame, trim_fraction, datasets=trim)
    usable = [m for m in metrics if np.isfinite(frame[m].to_numpy(dtype=np.float64)).any()]
    for skipped in sorted(set(metrics) - set(usable)):
        logger.warning("Metric %s has no finite values; skipped", skipped)
    if n_jobs in (None, 1):
        results = [_metric_tables(frame, m, hyperparameters, seed) for m in usable]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_metric_tables)(frame, m, hyperparameters, seed) for m in usable
        )
    tables: dict[str, pd.DataFrame] = {}
    for result in results:
        tables.update(result)
    if datasets:
        tables["scaling.csv"] = data_scaling(frame, datasets)
    outdir = Path(outdir)
    written = [atomic_write_frame(table, outdir / name) for name, table in sorted(tables.items())]
    logger.info("Wrote %d analysis tables to %s", len(written), outdir)
    return written


__all__ = [
    "AnalysisParams",
    "GBDT_PARAMS",
    "GD_METRICS",
    "HYPERPARAMETERS",
    "METRICS",
    "PERMUTATION_SEPARATOR",
    "ImportanceReport",
    "MarginalCurve",
    "data_scaling",
    "export_analysis",
    "gini_importance",
    "importance_across_datasets",
    "marginal",
    "marginal_gamma_optimized",
    "permutation_spread",
    "records_to_frame",
    "scale_unit",
    "scaled_feature_std",
    "trim_gd_outliers",
]
