"""
Hyperparameter sweeps over projected quantum kernels.

A :class:`GridSpec` describes the Cartesian grid of feature-map and kernel
hyperparameters; :func:`run_sweep` evaluates every grid point on one dataset
and returns one :class:`ResultRecord` per point. Embeddings are computed once
per ``(seed, t, T)`` and reduced density matrices once per additional ``K``;
Gram matrices and geometric differences are computed once per kernel
configuration and reused for every ``C``.

:func:`run_pipeline` runs the reduced search (``K = n_qubits``, ``T = 9``, a
handful of ``t`` values around the scaling heuristic) and
:func:`run_classical_sweep` evaluates classical SVM baselines on the same split.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import threading
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, ClassVar, Literal

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.typing import NDArray

from ._base_component import ParamsComponent
from .data import Dataset, split
from .exceptions import DimensionError
from .gd import geometric_difference
from .kernels import (
    ALPHA_MODES,
    CLASSICAL_KINDS,
    QUANTUM_BASES,
    GramMatrix,
    KernelParams,
    classical_cross_gram,
    classical_gram,
    quantum_cross_gram,
    quantum_gram_from_features,
    rdm_features,
    rescale_trace,
    resolve_gamma,
    trace_scale,
)
from .simulator import MAX_FEATURES, FeatureMapParams, embed_batch
from .svm import accuracy, cross_validate, predict, train
from .utils.csv_config import (
    CLASSICAL_RECORD_COLUMNS,
    GD_KINDS,
    RESULT_RECORD_COLUMNS,
)
from .utils.io import atomic_write_frame, atomic_write_text

logger = logging.getLogger("pyqkernel")

#: ``gamma`` recorded for bases that ignore the bandwidth.
GAMMA_PLACEHOLDER = 0.0

DEFAULT_T_VALUES: tuple[float, ...] = tuple(2.0**k for k in range(-6, 7))
DEFAULT_TROTTER_STEPS: tuple[int, ...] = (1, 3, 9, 27, 81)
DEFAULT_GAMMA_VALUES: tuple[float, ...] = tuple(float(g) for g in np.logspace(-3, 3, 13))
DEFAULT_C_VALUES: tuple[float, ...] = tuple(float(c) for c in np.logspace(-1, 5, 13))


def _check_positive(owner: str, name: str, values: Sequence[float]) -> None:
    if len(values) == 0:
        raise ValueError(f"{owner}: {name} must not be empty.")
    for value in values:
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"{owner}: {name} must be finite and > 0, got {value}.")


def _check_integers(owner: str, name: str, values: Sequence[int], minimum: int) -> None:
    if len(values) == 0:
        raise ValueError(f"{owner}: {name} must not be empty.")
    for value in values:
        if isinstance(value, bool) or not isinstance(value, int | np.integer):
            raise TypeError(f"{owner}: {name} must hold integers, got {value!r}.")
        if value < minimum:
            raise ValueError(f"{owner}: {name} must be >= {minimum}, got {value}.")


class GridSpec(ParamsComponent):
    """
    Hyperparameter grid of a quantum kernel sweep.

    Parameters
    ----------
    t_values : sequence of float, optional
        Evolution times, defaults to ``2**-6 ... 2**6`` (13 values).
    T_values : sequence of int, default=(1, 3, 9, 27, 81)
        Trotter steps.
    gamma_values : sequence of float, optional
        Distance-basis bandwidths, defaults to 13 log-spaced values on
        ``[1e-3, 1e3]``.
    K_values : sequence of int, optional
        Subsystem sizes, defaults to ``1 .. D + 1`` for ``D`` features.
    C_values : sequence of float, optional
        SVM box constraints, defaults to 13 log-spaced values on ``[1e-1, 1e5]``.
    bases : sequence of str, default=("inner", "distance")
        Kernel bases.
    seeds : sequence of int, default=(0,)
        Haar seeds of the initial product state.
    alpha_mode : {"mean", "unit"}, default="mean"
        Subsystem weighting.

    Examples
    --------
    >>> spec = GridSpec()
    >>> len(spec.t_values), spec.T_values, len(spec.C_values)
    (13, (1, 3, 9, 27, 81), 13)
    >>> spec.resolved_K(5)
    (1, 2, 3, 4, 5, 6)
    """

    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset(
        {"t_values", "T_values", "gamma_values", "K_values", "C_values", "bases", "seeds"}
    )

    def __init__(
        self,
        t_values: Sequence[float] | None = None,
        T_values: Sequence[int] = DEFAULT_TROTTER_STEPS,
        gamma_values: Sequence[float] | None = None,
        K_values: Sequence[int] | None = None,
        C_values: Sequence[float] | None = None,
        bases: Sequence[str] = ("inner", "distance"),
        seeds: Sequence[int] = (0,),
        alpha_mode: Literal["mean", "unit"] = "mean",
    ):
        self.t_values = DEFAULT_T_VALUES if t_values is None else t_values
        self.T_values = T_values
        self.gamma_values = DEFAULT_GAMMA_VALUES if gamma_values is None else gamma_values
        self.K_values = K_values
        self.C_values = DEFAULT_C_VALUES if C_values is None else C_values
        self.bases = bases
        self.seeds = seeds
        self.alpha_mode = alpha_mode

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the grid.

        Raises
        ------
        TypeError
            If an integer dimension holds a non-integer.
        ValueError
            If a dimension is empty or holds an out-of-range value, or a basis
            or the alpha mode is unknown.
        """
        owner = type(self).__name__
        _check_positive(owner, "t_values", self.t_values)
        _check_integers(owner, "T_values", self.T_values, 1)
        _check_positive(owner, "gamma_values", self.gamma_values)
        if self.K_values is not None:
            _check_integers(owner, "K_values", self.K_values, 1)
        _check_positive(owner, "C_values", self.C_values)
        if isinstance(self.bases, str) or len(self.bases) == 0:
            raise ValueError(f"{owner}: bases must be a non-empty sequence.")
        for basis in self.bases:
            if basis not in QUANTUM_BASES:
                raise ValueError(
                    f"{owner}: basis must be one of {QUANTUM_BASES}, got '{basis}'."
                )
        _check_integers(owner, "seeds", self.seeds, 0)
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(
                f"{owner}: alpha_mode must be one of {ALPHA_MODES}, got '{self.alpha_mode}'."
            )

    def resolved_K(self, n_features: int) -> tuple[int, ...]:
        """Subsystem sizes for a dataset with ``n_features`` features."""
        if self.K_values is not None:
            return tuple(int(k) for k in self.K_values)
        return tuple(range(1, n_features + 2))

    def size(self, n_features: int) -> int:
        """Number of grid points for ``n_features`` features."""
        per_basis = sum(
            len(self.gamma_values) if basis == "distance" else 1 for basis in self.bases
        )
        return (
            len(self.seeds)
            * len(self.t_values)
            * len(self.T_values)
            * per_basis
            * len(self.resolved_K(n_features))
            * len(self.C_values)
        )


@dataclass(frozen=True)
class GridPoint:
    """One configuration of the grid, ``index`` is its position in build order."""

    index: int
    seed: int
    t: float
    T: int
    basis: str
    K: int
    gamma: float
    C: float
    alpha_mode: str = "mean"

    @property
    def feature_map(self) -> FeatureMapParams:
        """Feature-map parameters of this point."""
        return FeatureMapParams(t=self.t, T=self.T, seed=self.seed)

    @property
    def kernel(self) -> KernelParams:
        """Kernel parameters of this point."""
        return KernelParams(
            basis=self.basis,  # type: ignore[arg-type]
            K=self.K,
            gamma=self.gamma,
            alpha_mode=self.alpha_mode,  # type: ignore[arg-type]
        )


def build_grid(spec: GridSpec, n_features: int) -> list[GridPoint]:
    """
    Expand a grid into points.

    Points are ordered by seed, t, T, basis, K, gamma and C (C varying
    fastest). Bases other than ``distance`` get the single gamma
    :data:`GAMMA_PLACEHOLDER`.

    Examples
    --------
    >>> spec = GridSpec(t_values=[1.0], T_values=[1], gamma_values=[0.5, 2.0],
    ...                 K_values=[1], C_values=[1.0])
    >>> [(p.basis, p.gamma) for p in build_grid(spec, 2)]
    [('inner', 0.0), ('distance', 0.5), ('distance', 2.0)]
    """
    points: list[GridPoint] = []
    K_values = spec.resolved_K(n_features)
    for seed in spec.seeds:
        for t in spec.t_values:
            for T in spec.T_values:
                for basis in spec.bases:
                    gammas = spec.gamma_values if basis == "distance" else (GAMMA_PLACEHOLDER,)
                    for K in K_values:
                        for gamma in gammas:
                            for C in spec.C_values:
                                points.append(
                                    GridPoint(
                                        index=len(points),
                                        seed=int(seed),
                                        t=float(t),
                                        T=int(T),
                                        basis=basis,
                                        K=int(K),
                                        gamma=float(gamma),
                                        C=float(C),
                                        alpha_mode=spec.alpha_mode,
                                    )
                                )
    return points


@dataclass(frozen=True)
class ResultRecord:
    """Outcome of one quantum grid point; accuracies and GDs are ``nan`` on failure."""

    dataset_id: str
    basis: str
    t: float
    T: int
    gamma: float
    K: int
    C: float
    seed: int
    alpha_mode: str
    acc_test: float
    acc_cv: float
    gd_rbf: float = math.nan
    gd_linear: float = math.nan
    gd_polynomial: float = math.nan
    gd_laplacian: float = math.nan
    gd_sigmoid: float = math.nan
    error: str = ""

    COLUMNS: ClassVar[tuple[str, ...]] = RESULT_RECORD_COLUMNS


@dataclass(frozen=True)
class ClassicalRecord:
    """Outcome of one classical SVM configuration."""

    dataset_id: str
    kind: str
    gamma: float
    degree: int
    coef0: float
    C: float
    seed: int
    acc_test: float
    acc_cv: float
    error: str = ""

    COLUMNS: ClassVar[tuple[str, ...]] = CLASSICAL_RECORD_COLUMNS


@dataclass(frozen=True)
class ClassicalBaseline:
    """
    Classical kernel a quantum Gram matrix is compared against.

    Examples
    --------
    >>> ClassicalBaseline("rbf")
    ClassicalBaseline(kind='rbf', gamma='scale', degree=3, coef0=1.0)
    """

    kind: str
    gamma: float | str = "scale"
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self) -> None:
        """Validate the kernel kind."""
        if self.kind not in CLASSICAL_KINDS:
            raise ValueError(
                f"ClassicalBaseline: kind must be one of {CLASSICAL_KINDS}, got '{self.kind}'."
            )

    def gram(self, X: NDArray[np.float64]) -> GramMatrix:
        """Trace-normalized Gram matrix of this baseline on ``X``."""
        return rescale_trace(
            classical_gram(X, self.kind, gamma=self.gamma, degree=self.degree, coef0=self.coef0)  # type: ignore[arg-type]
        )


DEFAULT_BASELINES: tuple[ClassicalBaseline, ...] = tuple(ClassicalBaseline(k) for k in GD_KINDS)


def derive_seed(global_seed: int, dataset_id: str, index: int) -> int:
    """
    Derive a 32-bit seed from the global seed, a dataset and a grid index.

    The dataset id is hashed with SHA-256 so the result does not depend on
    Python's per-process string hashing.

    Examples
    --------
    >>> derive_seed(0, "toy", 3) == derive_seed(0, "toy", 3)
    True
    >>> derive_seed(0, "toy", 3) == derive_seed(0, "toy", 4)
    False
    """
    digest = hashlib.sha256(dataset_id.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    sequence = np.random.SeedSequence([int(global_seed), key, int(index)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


# -- persistence ---------------------------------------------------------------


def records_to_frame(
    records: Iterable[ResultRecord | ClassicalRecord],
    record_type: type[ResultRecord] | type[ClassicalRecord] = ResultRecord,
) -> pd.DataFrame:
    """Records as a DataFrame with the stable column order of ``record_type``."""
    rows = [asdict(record) for record in records]
    return pd.DataFrame(rows, columns=list(record_type.COLUMNS))


def write_records(
    records: Sequence[ResultRecord | ClassicalRecord], path: str | os.PathLike[str]
) -> tuple[Path, Path]:
    """
    Write records to ``path`` (CSV) and to a sibling ``.jsonl`` file.

    Both files are written atomically. Missing values are empty cells in the
    CSV and ``null`` in the JSON lines.

    Returns
    -------
    tuple of Path
        CSV path and JSON-lines path.
    """
    record_type = type(records[0]) if records else ResultRecord
    frame = records_to_frame(records, record_type)
    csv_path = Path(path)
    jsonl_path = csv_path.with_suffix(".jsonl")
    atomic_write_frame(frame, csv_path)
    lines = frame.to_json(orient="records", lines=True, double_precision=15) if len(frame) else ""
    if lines and not lines.endswith("\n"):
        lines += "\n"
    atomic_write_text(jsonl_path, lines)
    logger.info("Wrote %d records to %s", len(frame), csv_path)
    return csv_path, jsonl_path


def read_records(
    path: str | os.PathLike[str],
    record_type: type[ResultRecord] | type[ClassicalRecord] = ResultRecord,
) -> list[Any]:
    """
    Read records written by :func:`write_records` (CSV or ``.jsonl``).

    An empty file gives an empty list.

    Raises
    ------
    ValueError
        If a required column is missing.
    """
    path = Path(path)
    if path.suffix == ".jsonl":
        text = path.read_text(encoding="utf-8")
        frame = (
            pd.read_json(path, lines=True, dtype=False)
            if text.strip()
            else pd.DataFrame(columns=list(record_type.COLUMNS))
        )
    else:
        try:
            frame = pd.read_csv(path, dtype={"dataset_id": str, "error": str})
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame(columns=list(record_type.COLUMNS))
    missing = [c for c in record_type.COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path.name}: missing columns {missing}.")
    frame["error"] = frame["error"].fillna("").astype(str)
    frame["dataset_id"] = frame["dataset_id"].astype(str)
    names = [f.name for f in fields(record_type)]
    records = []
    for row in frame[names].itertuples(index=False):
        values = dict(zip(names, row, strict=True))
        for key, value in values.items():
            if isinstance(value, np.generic):
                values[key] = value.item()
            if value is None:
                values[key] = math.nan
        records.append(record_type(**values))
    return records


class ResultSink:
    """
    Serialized collector of records.

    Workers hand their records to one sink; :meth:`flush` rewrites the CSV and
    JSON-lines files atomically with everything collected so far.

    Parameters
    ----------
    path : str or PathLike, optional
        CSV destination. Without it the sink only collects.
    flush_every : int, default=0
        Flush after this many new records (0 flushes only on demand).
    """

    def __init__(self, path: str | os.PathLike[str] | None = None, flush_every: int = 0):
        self.path = None if path is None else Path(path)
        self.flush_every = flush_every
        self._records: list[Any] = []
        self._pending = 0
        self._lock = threading.Lock()

    def extend(self, records: Iterable[ResultRecord | ClassicalRecord]) -> None:
        """Append records, flushing when ``flush_every`` new ones accumulated."""
        with self._lock:
            batch = list(records)
            self._records.extend(batch)
            self._pending += len(batch)
            if self.flush_every and self._pending >= self.flush_every:
                self._flush_locked()

    def flush(self) -> None:
        """Write everything collected so far."""
        with self._lock:
            self._flush_locked()

    def _flush_locked(self) -> None:
        if self.path is not None:
            write_records(self._records, self.path)
        self._pending = 0

    @property
    def records(self) -> list[Any]:
        """Copy of the collected records."""
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        """Number of collected records."""
        with self._lock:
            return len(self._records)


# -- quantum sweep -------------------------------------------------------------


@dataclass(frozen=True)
class _SweepContext:
    dataset_id: str
    train: Dataset
    test: Dataset
    baseline_grams: dict[str, GramMatrix | None] = field(repr=False)
    folds: int
    global_seed: int
    tol: float


@dataclass
class _KernelEntry:
    G_train: GramMatrix | None = None
    cross: NDArray[np.float64] | None = None
    gd: dict[str, float] = field(default_factory=dict)
    error: str = ""


def _baseline_grams(
    X: NDArray[np.float64], baselines: Sequence[ClassicalBaseline]
) -> dict[str, GramMatrix | None]:
    kinds = [b.kind for b in baselines]
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"Classical baselines must have distinct kinds, got {kinds}.")
    unknown = set(kinds) - set(GD_KINDS)
    if unknown:
        raise ValueError(f"No GD column for classical kinds {sorted(unknown)}.")
    grams: dict[str, GramMatrix | None] = {}
    for baseline in baselines:
        try:
            grams[baseline.kind] = baseline.gram(X)
        except ArithmeticError as e:
            logger.warning("Classical %s baseline unusable: %s", baseline.kind, e)
            grams[baseline.kind] = None
    return grams


def _kernel_entry(
    ctx: _SweepContext,
    features: tuple[NDArray[np.complex128], NDArray[np.complex128]],
    params: KernelParams,
) -> _KernelEntry:
    F_train, F_test = features
    entry = _KernelEntry()
    try:
        G = quantum_gram_from_features(F_train, params)
        scale = 1.0
        if params.basis == "inner":
            scale = trace_scale(G)
            G = GramMatrix(G.values * scale, kind=G.kind)
        entry.G_train = G
        entry.cross = quantum_cross_gram(F_test, F_train, params, scale=scale)
    except (ArithmeticError, ValueError) as e:
        entry.error = f"{type(e).__name__}: {e}"
        return entry
    for kind, K_C in ctx.baseline_grams.items():
        if K_C is None:
            entry.gd[kind] = math.nan
            continue
        try:
            entry.gd[kind] = geometric_difference(K_C, entry.G_train).g
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
            logger.warning("GD against %s failed for %s: %s", kind, params, e)
            entry.gd[kind] = math.nan
    return entry


def _evaluate_point(
    ctx: _SweepContext, point: GridPoint, entry: _KernelEntry
) -> ResultRecord:
    base = {
        "dataset_id": ctx.dataset_id,
        "basis": point.basis,
        "t": point.t,
        "T": point.T,
        "gamma": point.gamma,
        "K": point.K,
        "C": point.C,
        "seed": point.seed,
        "alpha_mode": point.alpha_mode,
    }
    gd = {f"gd_{kind}": value for kind, value in entry.gd.items()}
    if entry.error:
        return ResultRecord(**base, acc_test=math.nan, acc_cv=math.nan, error=entry.error)
    assert entry.G_train is not None and entry.cross is not None
    try:
        model = train(entry.G_train, ctx.train.y, point.C, tol=ctx.tol)
        acc_test = accuracy(predict(model, entry.cross), ctx.test.y)
        acc_cv = (
            cross_validate(
                entry.G_train,
                ctx.train.y,
                point.C,
                folds=ctx.folds,
                seed=derive_seed(ctx.global_seed, ctx.dataset_id, point.index),
                tol=ctx.tol,
            )
            if ctx.folds
            else math.nan
        )
    except (ArithmeticError, ValueError) as e:
        logger.warning("Grid point %d failed: %s", point.index, e)
        return ResultRecord(
            **base, acc_test=math.nan, acc_cv=math.nan, **gd, error=f"{type(e).__name__}: {e}"
        )
    return ResultRecord(**base, acc_test=acc_test, acc_cv=acc_cv, **gd)


def _run_group(ctx: _SweepContext, points: list[GridPoint]) -> list[ResultRecord]:
    """Evaluate all points sharing one ``(seed, t, T)`` embedding."""
    feature_map = points[0].feature_map
    states_train = embed_batch(ctx.train.X, feature_map)
    states_test = embed_batch(ctx.test.X, feature_map)

    features: dict[int, tuple[NDArray[np.complex128], NDArray[np.complex128]] | str] = {}
    kernels: dict[tuple[str, int, float], _KernelEntry] = {}
    records = []
    for point in points:
        if point.K not in features:
            try:
                features[point.K] = (
                    rdm_features(states_train, point.K),
                    rdm_features(states_test, point.K),
                )
            except ValueError as e:
                features[point.K] = f"{type(e).__name__}: {e}"
        key = (point.basis, point.K, point.gamma)
        if key not in kernels:
            cached = features[point.K]
            kernels[key] = (
                _KernelEntry(error=cached)
                if isinstance(cached, str)
                else _kernel_entry(ctx, cached, point.kernel)
            )
        records.append(_evaluate_point(ctx, point, kernels[key]))
    logger.debug(
        "Finished group seed=%d t=%g T=%d (%d points)",
        feature_map.seed,
        feature_map.t,
        feature_map.T,
        len(points),
    )
    return records


def _group_points(points: Sequence[GridPoint]) -> list[list[GridPoint]]:
    groups: dict[tuple[int, float, int], list[GridPoint]] = {}
    for point in points:
        groups.setdefault((point.seed, point.t, point.T), []).append(point)
    return list(groups.values())


def _check_sweep_inputs(ds: Dataset, train: Dataset, folds: int) -> None:
    if not 1 <= ds.n_features <= MAX_FEATURES:
        raise DimensionError(
            f"{ds.dataset_id}: {ds.n_features} features, the feature map supports 1..{MAX_FEATURES}."
        )
    if not ds.is_complete:
        raise ValueError(f"{ds.dataset_id}: dataset must be preprocessed (non-finite values).")
    if folds < 0 or folds == 1:
        raise ValueError(f"folds must be 0 (disabled) or >= 2, got {folds}.")
    if folds and min(train.class_counts) < folds:
        raise ValueError(
            f"{ds.dataset_id}: training split has {train.class_counts} points per class, "
            f"too few for {folds}-fold cross-validation."
        )


def run_points(
    ds: Dataset,
    points: Sequence[GridPoint],
    baselines: Sequence[ClassicalBaseline] | None = None,
    folds: int = 5,
    train_fraction: float = 2 / 3,
    seed: int = 0,
    tol: float = 1e-3,
    n_jobs: int | None = 1,
    sink: ResultSink | None = None,
) -> list[ResultRecord]:
    """Evaluate an explicit list of grid points; see :func:`run_sweep`."""
    train_ds, test_ds = split(ds, train_fraction, seed=derive_seed(seed, ds.dataset_id, 0))
    _check_sweep_inputs(ds, train_ds, folds)
    ctx = _SweepContext(
        dataset_id=ds.dataset_id,
        train=train_ds,
        test=test_ds,
        baseline_grams=_baseline_grams(
            train_ds.X, DEFAULT_BASELINES if baselines is None else baselines
        ),
        folds=folds,
        global_seed=seed,
        tol=tol,
    )
    groups = _group_points(points)
    logger.info(
        "Sweeping %s: %d points in %d embedding groups (%d workers)",
        ds.dataset_id,
        len(points),
        len(groups),
        n_jobs or 1,
    )
    sink = sink if sink is not None else ResultSink()
    if n_jobs in (None, 1) or len(groups) < 2:
        results: Iterable[list[ResultRecord]] = (_run_group(ctx, group) for group in groups)
    else:
        results = Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(_run_group)(ctx, group) for group in groups
        )
    records: list[ResultRecord] = []
    for group_records in results:
        sink.extend(group_records)
        records.extend(group_records)
    sink.flush()
    return records


def run_sweep(
    ds: Dataset,
    spec: GridSpec | None = None,
    baselines: Sequence[ClassicalBaseline] | None = None,
    folds: int = 5,
    train_fraction: float = 2 / 3,
    seed: int = 0,
    tol: float = 1e-3,
    n_jobs: int | None = 1,
    sink: ResultSink | None = None,
) -> list[ResultRecord]:
    """
    Evaluate every point of a grid on one dataset.

    The dataset is split once (stratified, seeded). For each point an SVM is
    trained on the training block of the quantum Gram matrix; the record
    holds the test accuracy, the mean k-fold CV accuracy on the training block
    and the geometric difference of the training block to each classical
    baseline. Inner-basis Gram matrices are trace-rescaled to ``N_train`` and
    the same factor is applied to the test-vs-train block.

    Parameters
    ----------
    ds : Dataset
        Preprocessed dataset with 1..7 features.
    spec : GridSpec, optional
        Grid, defaults to :class:`GridSpec`.
    baselines : sequence of ClassicalBaseline, optional
        Classical kernels for the GD columns, one per kind.
    folds : int, default=5
        CV folds; 0 disables cross-validation (``acc_cv`` is ``nan``).
    train_fraction : float, default=2/3
        Share of points used for training.
    seed : int, default=0
        Global seed of the split and of the per-point CV folds.
    tol : float, default=1e-3
        SMO tolerance.
    n_jobs : int, optional
        Workers; each handles whole ``(seed, t, T)`` groups.
    sink : ResultSink, optional
        Collector that persists records as groups finish.

    Returns
    -------
    list of ResultRecord
        One record per grid point, in grid order. Failures are recorded in
        the ``error`` field.
    """
    spec = spec or GridSpec()
    return run_points(
        ds,
        build_grid(spec, ds.n_features),
        baselines=baselines,
        folds=folds,
        train_fraction=train_fraction,
        seed=seed,
        tol=tol,
        n_jobs=n_jobs,
        sink=sink,
    )


# -- reduced pipeline ----------------------------------------------------------


class PipelineSpec(ParamsComponent):
    """
    Reduced search of the hyperparameter pipeline.

    ``K`` equals the number of qubits and ``T`` is fixed. For each basis the
    ``t`` candidates are ``n_t`` log-spaced values on ``t_range`` plus the
    value that brings the standard deviation of ``t * X`` to the basis target
    (clipped to ``t_range``). The distance basis additionally scans
    ``gamma_values`` jointly with ``C``.

    Examples
    --------
    >>> spec = PipelineSpec()
    >>> spec.T, spec.n_t, spec.target_std
    (9, 5, {'inner': 0.49, 'distance': 0.22})
    """

    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset(
        {"t_range", "gamma_values", "C_values", "bases"}
    )

    def __init__(
        self,
        T: int = 9,
        n_t: int = 5,
        t_range: Sequence[float] = (0.1, 1.0),
        target_std_inner: float = 0.49,
        target_std_distance: float = 0.22,
        gamma_values: Sequence[float] | None = None,
        C_values: Sequence[float] | None = None,
        bases: Sequence[str] = ("inner", "distance"),
        seed: int = 0,
        alpha_mode: Literal["mean", "unit"] = "mean",
    ):
        self.T = T
        self.n_t = n_t
        self.t_range = t_range
        self.target_std_inner = target_std_inner
        self.target_std_distance = target_std_distance
        self.gamma_values = (
            tuple(float(g) for g in np.logspace(-1, 1, 5)) if gamma_values is None else gamma_values
        )
        self.C_values = DEFAULT_C_VALUES if C_values is None else C_values
        self.bases = bases
        self.seed = seed
        self.alpha_mode = alpha_mode

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the pipeline settings.

        Raises
        ------
        ValueError
            If a value is out of range or a basis is unsupported.
        """
        owner = type(self).__name__
        _check_integers(owner, "T", [self.T], 1)
        _check_integers(owner, "n_t", [self.n_t], 1)
        _check_integers(owner, "seed", [self.seed], 0)
        if len(self.t_range) != 2 or not 0 < self.t_range[0] <= self.t_range[1]:
            raise ValueError(f"{owner}: t_range must be (low, high) with 0 < low <= high.")
        _check_positive(owner, "target_std", [self.target_std_inner, self.target_std_distance])
        _check_positive(owner, "gamma_values", self.gamma_values)
        _check_positive(owner, "C_values", self.C_values)
        for basis in self.bases:
            if basis not in ("inner", "distance"):
                raise ValueError(f"{owner}: bases must be 'inner' or 'distance', got '{basis}'.")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"{owner}: alpha_mode must be one of {ALPHA_MODES}.")

    @property
    def target_std(self) -> dict[str, float]:
        """Target standard deviation of the scaled features per basis."""
        return {"inner": self.target_std_inner, "distance": self.target_std_distance}

    def t_candidates(self, ds: Dataset, basis: str) -> tuple[float, ...]:
        """Log-spaced candidates plus the scaling-derived value, sorted."""
        low, high = self.t_range
        grid = {float(t) for t in np.geomspace(low, high, self.n_t)}
        std = float(np.std(ds.X))
        if std > 0:
            grid.add(float(np.clip(self.target_std[basis] / std, low, high)))
        return tuple(sorted(grid))

    def grids(self, ds: Dataset) -> list[GridSpec]:
        """One :class:`GridSpec` per basis."""
        n_qubits = ds.n_features + 1
        return [
            GridSpec(
                t_values=self.t_candidates(ds, basis),
                T_values=(self.T,),
                gamma_values=self.gamma_values,
                K_values=(n_qubits,),
                C_values=self.C_values,
                bases=(basis,),
                seeds=(self.seed,),
                alpha_mode=self.alpha_mode,
            )
            for basis in self.bases
        ]


def pipeline_points(ds: Dataset, spec: PipelineSpec | None = None) -> list[GridPoint]:
    """Grid points of the reduced search, indexed consecutively across bases."""
    spec = spec or PipelineSpec()
    points: list[GridPoint] = []
    for grid in spec.grids(ds):
        for point in build_grid(grid, ds.n_features):
            points.append(
                GridPoint(**{**asdict(point), "index": len(points)})
            )
    return points


def run_pipeline(
    ds: Dataset,
    spec: PipelineSpec | None = None,
    baselines: Sequence[ClassicalBaseline] | None = None,
    folds: int = 5,
    train_fraction: float = 2 / 3,
    seed: int = 0,
    tol: float = 1e-3,
    n_jobs: int | None = 1,
    sink: ResultSink | None = None,
) -> list[ResultRecord]:
    """
    Run the reduced hyperparameter search.

    Parameters are those of :func:`run_sweep`; ``spec`` replaces the grid.

    Examples
    --------
    >>> from pyqkernel.datasets import make_toy_dataset
    >>> from pyqkernel.data import preprocess
    >>> ds = preprocess(make_toy_dataset(n_points=40), target_points=40)
    >>> len(pipeline_points(ds))
    468
    """
    points = pipeline_points(ds, spec)
    logger.info(
        "Pipeline for %s: %d points (full grid %d)",
        ds.dataset_id,
        len(points),
        GridSpec().size(ds.n_features),
    )
    return run_points(
        ds,
        points,
        baselines=baselines,
        folds=folds,
        train_fraction=train_fraction,
        seed=seed,
        tol=tol,
        n_jobs=n_jobs,
        sink=sink,
    )


# -- classical sweep -----------------------------------------------------------


def classical_gamma_values(
    X: NDArray[np.float64], gamma_values: Sequence[float] | None = None
) -> tuple[float, ...]:
    """
    Bandwidth grid of the classical sweep: the quantum grid plus ``1/D`` and ``1/(D var X)``.

    Examples
    --------
    >>> X = np.array([[0.0, 1.0], [2.0, 3.0]])
    >>> classical_gamma_values(X, [1.0])
    (0.4, 0.5, 1.0)
    """
    values = set(DEFAULT_GAMMA_VALUES if gamma_values is None else gamma_values)
    values.add(resolve_gamma(X, "auto"))
    values.add(resolve_gamma(X, "scale"))
    return tuple(sorted(float(v) for v in values))


def _classical_configs(
    kind: str, gammas: Sequence[float], C_values: Sequence[float]
) -> list[tuple[float, float]]:
    kind_gammas = (GAMMA_PLACEHOLDER,) if kind == "linear" else gammas
    return [(g, C) for g in kind_gammas for C in C_values]


def _run_classical_kind(
    ds_id: str,
    train_ds: Dataset,
    test_ds: Dataset,
    kind: str,
    configs: list[tuple[float, float]],
    degree: int,
    coef0: float,
    folds: int,
    seed: int,
    tol: float,
) -> list[ClassicalRecord]:
    records = []
    grams: dict[float, tuple[GramMatrix, NDArray[np.float64]] | str] = {}
    for gamma, C in configs:
        base = {
            "dataset_id": ds_id,
            "kind": kind,
            "gamma": gamma,
            "degree": degree,
            "coef0": coef0,
            "C": C,
            "seed": seed,
        }
        if gamma not in grams:
            g = None if kind == "linear" else gamma
            try:
                grams[gamma] = (
                    classical_gram(train_ds.X, kind, gamma=g, degree=degree, coef0=coef0),  # type: ignore[arg-type]
                    classical_cross_gram(
                        test_ds.X, train_ds.X, kind, gamma=g, degree=degree, coef0=coef0  # type: ignore[arg-type]
                    ),
                )
            except (ArithmeticError, ValueError) as e:
                grams[gamma] = f"{type(e).__name__}: {e}"
        cached = grams[gamma]
        if isinstance(cached, str):
            records.append(ClassicalRecord(**base, acc_test=math.nan, acc_cv=math.nan, error=cached))
            continue
        G, cross = cached
        try:
            model = train(G, train_ds.y, C, tol=tol)
            acc_test = accuracy(predict(model, cross), test_ds.y)
            acc_cv = (
                cross_validate(G, train_ds.y, C, folds=folds, seed=seed, tol=tol)
                if folds
                else math.nan
            )
        except (ArithmeticError, ValueError) as e:
            records.append(
                ClassicalRecord(
                    **base, acc_test=math.nan, acc_cv=math.nan, error=f"{type(e).__name__}: {e}"
                )
            )
            continue
        records.append(ClassicalRecord(**base, acc_test=acc_test, acc_cv=acc_cv))
    return records


def run_classical_sweep(
    ds: Dataset,
    kinds: Sequence[str] = CLASSICAL_KINDS,
    gamma_values: Sequence[float] | None = None,
    C_values: Sequence[float] | None = None,
    degree: int = 3,
    coef0: float = 1.0,
    folds: int = 5,
    train_fraction: float = 2 / 3,
    seed: int = 0,
    tol: float = 1e-3,
    n_jobs: int | None = 1,
) -> list[ClassicalRecord]:
    """
    Evaluate classical SVMs on the split used by :func:`run_sweep`.

    Every kind except ``linear`` scans the bandwidths of
    :func:`classical_gamma_values`; classical Gram matrices are used
    unscaled.

    Returns
    -------
    list of ClassicalRecord
        Ordered by kind, gamma and C.
    """
    for kind in kinds:
        if kind not in CLASSICAL_KINDS:
            raise ValueError(f"Unknown classical kind '{kind}', expected one of {CLASSICAL_KINDS}.")
    train_ds, test_ds = split(ds, train_fraction, seed=derive_seed(seed, ds.dataset_id, 0))
    _check_sweep_inputs(ds, train_ds, folds)
    gammas = classical_gamma_values(train_ds.X, gamma_values)
    C_values = DEFAULT_C_VALUES if C_values is None else tuple(C_values)
    cv_seed = derive_seed(seed, ds.dataset_id, 1)
    jobs = [
        (
            ds.dataset_id,
            train_ds,
            test_ds,
            kind,
            _classical_configs(kind, gammas, C_values),
            degree,
            coef0,
            folds,
            cv_seed,
            tol,
        )
        for kind in kinds
    ]
    logger.info("Classical sweep of %s over %s", ds.dataset_id, list(kinds))
    if n_jobs in (None, 1):
        results = [_run_classical_kind(*job) for job in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_run_classical_kind)(*job) for job in jobs)
    return [record for kind_records in results for record in kind_records]


def best_accuracy(
    records: Iterable[ResultRecord | ClassicalRecord],
    metric: Literal["acc_test", "acc_cv"] = "acc_test",
) -> float:
    """
    Largest finite value of ``metric`` over ``records`` (``nan`` if none).

    Examples
    --------
    >>> r = ResultRecord("d", "inner", 1.0, 1, 0.0, 1, 1.0, 0, "mean", 0.75, math.nan)
    >>> best_accuracy([r])
    0.75
    """
    values = [getattr(r, metric) for r in records]
    finite = [v for v in values if np.isfinite(v)]
    return max(finite) if finite else math.nan


__all__ = [
    "DEFAULT_BASELINES",
    "DEFAULT_C_VALUES",
    "DEFAULT_GAMMA_VALUES",
    "DEFAULT_TROTTER_STEPS",
    "DEFAULT_T_VALUES",
    "GAMMA_PLACEHOLDER",
    "ClassicalBaseline",
    "ClassicalRecord",
    "GridPoint",
    "GridSpec",
    "PipelineSpec",
    "ResultRecord",
    "ResultSink",
    "best_accuracy",
    "build_grid",
    "classical_gamma_values",
    "derive_seed",
    "pipeline_points",
    "read_records",
    "records_to_frame",
    "run_classical_sweep",
    "run_pipeline",
    "run_points",
    "run_sweep",
    "write_records",
]
