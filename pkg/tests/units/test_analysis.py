from __future__ import annotations

import itertools
import math

import numpy as np
import pandas as pd
import pytest

from pyqkernel.analysis import (
    GD_METRICS,
    HYPERPARAMETERS,
    METRICS,
    AnalysisParams,
    data_scaling,
    export_analysis,
    gini_importance,
    importance_across_datasets,
    marginal,
    marginal_gamma_optimized,
    permutation_spread,
    records_to_frame,
    scale_unit,
    scaled_feature_std,
    trim_gd_outliers,
)
from pyqkernel.sweep import ResultRecord

"""
Tests for the analysis of sweep results.
"""


def synthetic_records(dataset_id: str = "d0", seed: int = 0, offset: float = 0.0) -> pd.DataFrame:
    """Small result grid whose accuracy depends on t only."""
    rng = np.random.default_rng(seed)
    rows = []
    for basis, t, T, K, C in itertools.product(
        ("inner", "distance"), (0.1, 1.0, 10.0), (1, 3), (1, 2), (1.0, 10.0)
    ):
        gammas = (0.0,) if basis == "inner" else (0.1, 1.0)
        for gamma in gammas:
            acc = 0.6 + 0.1 * math.log10(t) + offset + 0.001 * rng.standard_normal()
            gd = 1.0 + t + 0.01 * rng.random()
            rows.append(
                {
                    "dataset_id": dataset_id,
                    "basis": basis,
                    "t": t,
                    "T": T,
                    "gamma": gamma,
                    "K": K,
                    "C": C,
                    "seed": 0,
                    "alpha_mode": "mean",
                    "acc_test": acc,
                    "acc_cv": acc,
                    **{column: gd for column in GD_METRICS},
                    "error": "",
                }
            )
    return pd.DataFrame(rows)


class TestAnalysisParams:
    """Test class for AnalysisParams."""

    def test_defaults(self):
        """Test the default metric and hyperparameter sets."""
        params = AnalysisParams()
        assert params.metrics == METRICS
        assert params.hyperparameters == HYPERPARAMETERS
        assert params.trim_fraction == 0.03

    def test_unknown_metric(self):
        """Test that unknown metrics are rejected."""
        with pytest.raises(ValueError, match="metrics must be a subset"):
            AnalysisParams(metrics=["loss"])

    def test_unknown_hyperparameter(self):
        """Test that unknown hyperparameters are rejected."""
        with pytest.raises(ValueError, match="hyperparameters must be a subset"):
            AnalysisParams(hyperparameters=["depth"])

    @pytest.mark.parametrize("fraction", [-0.1, 1.0])
    def test_trim_fraction_range(self, fraction):
        """Test the trim fraction bounds."""
        with pytest.raises(ValueError, match="trim_fraction"):
            AnalysisParams(trim_fraction=fraction)


class TestScaling:
    """Test class for unit scaling helpers."""

    def test_scale_unit_keeps_nan(self):
        """Test that non-finite entries pass through."""
        scaled = scale_unit([2.0, np.nan, 4.0])
        assert scaled[0] == 0.5
        assert np.isnan(scaled[1])
        assert scaled[2] == 1.0

    def test_scale_unit_requires_positive_max(self):
        """Test that a non-positive maximum is rejected."""
        with pytest.raises(ValueError, match="maximum must be positive"):
            scale_unit([0.0, -1.0])

    def test_scaled_feature_std(self, small_dataset):
        """Test the spread of scaled features."""
        assert scaled_feature_std(small_dataset, 2.0) == pytest.approx(2.0 * np.std(small_dataset.X))


class TestMarginal:
    """Test class for marginal curves."""

    def test_curve_over_t(self):
        """Test that the marginal recovers the dependence on t."""
        curve = marginal(synthetic_records(), "t", "acc_test")
        assert curve.values == (0.1, 1.0, 10.0)
        np.testing.assert_allclose(curve.mean, [0.5, 0.6, 0.7], atol=0.01)
        assert curve.count.tolist() == [24, 24, 24]
        assert curve.n_nonfinite == 0

    def test_non_finite_values_excluded(self):
        """Test that failed points are counted and excluded."""
        frame = pd.DataFrame({"C": [1.0, 1.0, 10.0], "acc_test": [0.8, np.nan, 0.6]})
        curve = marginal(frame, "C", "acc_test")
        assert curve.mean.tolist() == [0.8, 0.6]
        assert curve.count.tolist() == [1, 1]
        assert curve.n_nonfinite == 1

    def test_value_without_finite_metric(self):
        """Test that a value with only failures keeps a nan mean."""
        frame = pd.DataFrame({"K": [1, 2], "acc_test": [0.7, np.inf]})
        curve = marginal(frame, "K", "acc_test")
        assert curve.values == (1, 2)
        assert np.isnan(curve.mean[1])
        assert curve.count.tolist() == [1, 0]

    def test_unit_scale_per_dataset(self):
        """Test that GD values are scaled by their per-dataset maximum."""
        frame = pd.concat(
            [synthetic_records("a"), synthetic_records("b").assign(gd_rbf=lambda f: 100 * f.gd_rbf)]
        )
        curve = marginal(frame, "t", "gd_rbf", unit_scale=True)
        assert np.nanmax(curve.mean) <= 1.0
        assert curve.mean[-1] == pytest.approx(1.0, abs=0.01)

    def test_table_schema(self):
        """Test the columns of the exported table."""
        table = marginal(synthetic_records(), "K", "acc_cv").to_frame()
        assert list(table.columns) == ["value", "mean", "std", "count", "n_nonfinite"]

    def test_unknown_column(self):
        """Test that unknown field names are rejected."""
        with pytest.raises(ValueError, match="Unknown field names"):
            marginal(synthetic_records(), "depth", "acc_test")

    def test_unit_scale_needs_dataset_id(self):
        """Test that per-dataset scaling requires the dataset column."""
        frame = pd.DataFrame({"t": [1.0, 2.0], "gd_rbf": [1.0, 2.0]})
        with pytest.raises(ValueError, match=r"Unknown field names \['dataset_id'\]"):
            marginal(frame, "t", "gd_rbf", unit_scale=True)

    def test_no_records(self):
        """Test that an empty input is rejected."""
        with pytest.raises(ValueError, match="No records"):
            marginal([], "t", "acc_test")

    def test_accepts_records(self):
        """Test ResultRecord input."""
        records = [
            ResultRecord("d", "inner", 1.0, 1, 0.0, 1, 1.0, 0, "mean", 0.5, 0.5),
            ResultRecord("d", "inner", 2.0, 1, 0.0, 1, 1.0, 0, "mean", 0.9, 0.9),
        ]
        curve = marginal(records, "t", "acc_test")
        assert curve.mean.tolist() == [0.5, 0.9]

    def test_gamma_optimized(self):
        """Test that the best gamma of each setting is used."""
        frame = synthetic_records()
        frame.loc[(frame.basis == "distance") & (frame.gamma == 1.0), "acc_test"] += 0.2
        curve = marginal_gamma_optimized(frame, "acc_test")
        assert curve.values == ("distance", "inner")
        assert curve.mean[0] == pytest.approx(curve.mean[1] + 0.2, abs=0.01)
        assert curve.count.tolist() == [24, 24]


class TestTrimGdOutliers:
    """Test class for GD outlier trimming."""

    def records(self, dataset_id="d", n=100):
        """Records with increasing GD to the rbf baseline."""
        return [
            ResultRecord(dataset_id, "inner", 1.0, 1, 0.0, 1, 1.0, 0, "mean", 0.5, 0.5, gd_rbf=float(i))
            for i in range(n)
        ]

    def test_largest_values_removed(self):
        """Test that the top 3% of GD values are dropped."""
        kept = trim_gd_outliers(self.records(), 0.03)
        assert len(kept) == 97
        assert max(r.gd_rbf for r in kept) == 96.0
        assert all(isinstance(r, ResultRecord) for r in kept)

    def test_only_listed_datasets(self):
        """Test that other datasets are left untouched."""
        records = self.records("a") + self.records("b")
        kept = trim_gd_outliers(records, 0.03, datasets=["a"])
        assert len(kept) == 197
        assert sum(r.dataset_id == "b" for r in kept) == 100

    def test_union_over_columns(self):
        """Test that records marked by any GD column are removed."""
        frame = records_to_frame(self.records())
        frame["gd_linear"] = -frame["gd_rbf"]
        kept = trim_gd_outliers(frame, 0.03)
        assert len(kept) == 94
        assert kept.index.tolist() == list(range(3, 97))

    def test_zero_fraction(self):
        """Test that nothing is dropped for a zero fraction."""
        assert len(trim_gd_outliers(self.records(), 0.0)) == 100

    def test_invalid_fraction(self):
        """Test that the fraction must be in [0, 1)."""
        with pytest.raises(ValueError, match="fraction"):
            trim_gd_outliers(self.records(), 1.0)


class TestImportance:
    """Test class for the impurity-based hyperparameter importance."""

    def test_dominant_hyperparameter(self):
        """Test that t carries most of the importance."""
        report = gini_importance(synthetic_records(), "acc_test")
        assert set(report.importances) == set(HYPERPARAMETERS)
        assert sum(report.importances.values()) == pytest.approx(1.0)
        assert max(report.importances, key=report.importances.get) == "t"
        assert report.dataset_id == "d0"
        assert not report.degenerate
        assert report.n_records == 72

    def test_order_independent(self):
        """Test that shuffling the records does not change the report."""
        frame = synthetic_records()
        shuffled = frame.sample(frac=1.0, random_state=3)
        a = gini_importance(frame, "acc_test")
        b = gini_importance(shuffled, "acc_test")
        assert a.importances == b.importances

    def test_constant_metric(self):
        """Test that a constant metric gives a uniform degenerate report."""
        frame = synthetic_records().assign(acc_test=0.5)
        with pytest.warns(UserWarning, match="constant"):
            report = gini_importance(frame, "acc_test", ["t", "C"])
        assert report.degenerate
        assert report.importances == {"t": 0.5, "C": 0.5}

    def test_report_frame(self):
        """Test the per-hyperparameter table."""
        table = gini_importance(synthetic_records(), "acc_test", ["t", "K"]).to_frame()
        assert table["hyperparameter"].tolist() == ["t", "K"]

    def test_across_datasets(self):
        """Test the mean and spread over datasets."""
        frame = pd.concat(
            [synthetic_records("a", seed=1), synthetic_records("b", seed=2, offset=0.1)]
        )
        table = importance_across_datasets(frame, "acc_test")
        assert list(table.columns) == ["hyperparameter", "importance", "std", "n_datasets", "degenerate"]
        assert table["importance"].sum() == pytest.approx(1.0)
        assert table["n_datasets"].unique().tolist() == [2]
        assert table.set_index("hyperparameter")["importance"].idxmax() == "t"


class TestScalingAndPermutations:
    """Test class for the data-scaling and permutation tables."""

    def test_data_scaling(self, small_dataset):
        """Test the best t and the resulting feature spread."""
        frame = synthetic_records(small_dataset.dataset_id)
        table = data_scaling(frame, {small_dataset.dataset_id: small_dataset})
        assert table["basis"].tolist() == ["distance", "inner"]
        assert table["best_t"].tolist() == [10.0, 10.0]
        assert table["scaled_std"].iloc[0] == pytest.approx(10.0 * np.std(small_dataset.X))

    def test_data_scaling_permuted_ids(self, small_dataset):
        """Test that permuted ids fall back to their base dataset."""
        frame = synthetic_records(f"{small_dataset.dataset_id}@210")
        table = data_scaling(frame, {small_dataset.dataset_id: small_dataset})
        assert len(table) == 2

    def test_data_scaling_unknown_dataset(self, small_dataset):
        """Test that records of unknown datasets are skipped."""
        table = data_scaling(synthetic_records("other"), {small_dataset.dataset_id: small_dataset})
        assert table.empty

    def test_permutation_spread(self):
        """Test the std of a metric across feature orderings."""
        frame = pd.concat(
            [synthetic_records("d@012", seed=1), synthetic_records("d@210", seed=1, offset=0.1)]
        )
        table = permutation_spread(frame)
        assert table["dataset_id"].tolist() == ["d"]
        assert table["n_permutations"].iloc[0] == 2
        assert table["n_settings"].iloc[0] == 72
        assert table["mean_std"].iloc[0] == pytest.approx(0.05)


class TestExportAnalysis:
    """Test class for export_analysis."""

    def test_written_tables(self, tmp_path, small_dataset):
        """Test the table files written for one metric."""
        frame = synthetic_records(small_dataset.dataset_id)
        written = export_analysis(
            frame,
            tmp_path,
            metrics=["acc_test"],
            hyperparameters=["t", "C"],
            datasets={small_dataset.dataset_id: small_dataset},
        )
        assert [p.name for p in written] == [
            "importance_acc_test.csv",
            "marginals_C_acc_test.csv",
            "marginals_basis-gamma-optimized_acc_test.csv",
            "marginals_t_acc_test.csv",
            "scaling.csv",
        ]
        table = pd.read_csv(tmp_path / "marginals_t_acc_test.csv")
        assert table["value"].tolist() == [0.1, 1.0, 10.0]

    def test_deterministic(self, tmp_path):
        """Test that two exports are byte-identical."""
        frame = synthetic_records()
        a = export_analysis(frame, tmp_path / "a", metrics=["acc_test", "gd_rbf"])
        b = export_analysis(frame, tmp_path / "b", metrics=["acc_test", "gd_rbf"])
        for path_a, path_b in zip(a, b, strict=True):
            assert path_a.read_bytes() == path_b.read_bytes()

    def test_metric_without_values_skipped(self, tmp_path):
        """Test that an all-nan metric produces no tables."""
        frame = synthetic_records().assign(acc_cv=np.nan)
        written = export_analysis(frame, tmp_path, metrics=["acc_test", "acc_cv"], hyperparameters=["t"])
        assert not any("acc_cv" in p.name for p in written)

    def test_trimming(self, tmp_path):
        """Test that trimming is applied before the tables are built."""
        frame = synthetic_records()
        frame.loc[0, "gd_rbf"] = 1e6
        export_analysis(
            frame, tmp_path, metrics=["gd_rbf"], hyperparameters=["t"], trim_datasets=["d0"]
        )
        table = pd.read_csv(tmp_path / "marginals_t_gd_rbf.csv")
        assert table["count"].sum() < len(frame)

    def test_empty_records(self, tmp_path):
        """Test that there must be records to analyze."""
        with pytest.raises(ValueError, match="No records"):
            export_analysis([], tmp_path)

    def test_unknown_metric(self, tmp_path):
        """Test that unknown metrics are rejected."""
        with pytest.raises(ValueError, match="Unknown metrics"):
            export_analysis(synthetic_records(), tmp_path, metrics=["loss"])
