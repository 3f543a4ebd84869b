"""
Column schemas of every table pyqkernel writes.

Writers and readers share these definitions so that files produced by a
sweep and read back by the analysis stage always agree on column order
and types.
"""

#: Classical baseline kernels the sweep reports a GD against, in column order.
GD_KINDS: tuple[str, ...] = ("rbf", "linear", "polynomial", "laplacian", "sigmoid")

#: One row per quantum grid point.
RESULT_RECORD_COLUMNS: tuple[str, ...] = (
    "dataset_id",
    "basis",
    "t",
    "T",
    "gamma",
    "K",
    "C",
    "seed",
    "alpha_mode",
    "acc_test",
    "acc_cv",
    *(f"gd_{kind}" for kind in GD_KINDS),
    "error",
)

#: One row per classical (kind, gamma, C) configuration.
CLASSICAL_RECORD_COLUMNS: tuple[str, ...] = (
    "dataset_id",
    "kind",
    "gamma",
    "degree",
    "coef0",
    "C",
    "seed",
    "acc_test",
    "acc_cv",
    "error",
)


# Configuration for each analysis table written by ``export_analysis``.
ANALYSIS_COLUMNS: dict[str, tuple[str, ...]] = {
    "marginal": ("value", "mean", "std", "count", "n_nonfinite"),
    "marginal_gamma_optimized": ("basis", "mean", "std", "count"),
    "importance": ("hyperparameter", "importance", "std", "n_datasets", "degenerate"),
}

SCALING_COLUMNS: tuple[str, ...] = ("dataset_id", "basis", "best_t", "scaled_std", "mean_metric")
