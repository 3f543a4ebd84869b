from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from pyqkernel import __version__
from pyqkernel.cli import build_parser, main
from pyqkernel.data import write_csv
from pyqkernel.parsers import parse_run_config
from pyqkernel.sweep import ResultRecord, write_records

"""
Tests for the pyqkernel command line.
"""


@pytest.fixture
def toy_csv(tmp_path, small_dataset):
    """Canonical dataset file of the small dataset."""
    return write_csv(small_dataset, tmp_path / "data" / "toy.csv")


def dataset_args(path, *extra):
    """--set arguments declaring one dataset."""
    args = ["--set", f"DATASET.path='{path}'"]
    for item in extra:
        args += ["--set", item]
    return args


def small_grid_args():
    """--set arguments of a one-point quantum grid."""
    return [
        "--set", "GRIDSPEC.t_values=0.5",
        "--set", "GRIDSPEC.trotter_values=1",
        "--set", "GRIDSPEC.K_values=1",
        "--set", "GRIDSPEC.gamma_values=1.0",
        "--set", "GRIDSPEC.C_values=1.0",
        "--set", "GRIDSPEC.bases='inner'",
    ]


class TestParser:
    """Test class for the argument parser."""

    def test_version(self, capsys):
        """Test the --version flag."""
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip() == f"pyqkernel {__version__}"

    def test_command_required(self):
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_gd_arguments(self):
        """Test the positional sources of the gd command."""
        args = build_parser().parse_args(["gd", "classical", "k.csv", "--workers", "2"])
        assert (args.classical, args.quantum, args.workers) == ("classical", "k.csv", 2)

    def test_repeated_overrides(self):
        """Test that --set may be given several times."""
        args = build_parser().parse_args(["sweep", "--set", "RUN.seed=1", "--set", "RUN.folds=0"])
        assert args.overrides == ["RUN.seed=1", "RUN.folds=0"]


class TestPreprocessCommand:
    """Test class for the preprocess command."""

    def run(self, tmp_path, raw_csv):
        """Run preprocess on the raw CSV fixture."""
        return main(
            [
                "preprocess",
                "--outdir", str(tmp_path / "out"),
                "--seed", "3",
                *dataset_args(
                    raw_csv,
                    "DATASET.label_column='species'",
                    "PREPROCESS.target_features=3",
                ),
            ]
        )

    def test_outputs(self, tmp_path, raw_csv):
        """Test the canonical file and the provenance files."""
        assert self.run(tmp_path, raw_csv) == 0
        directory = tmp_path / "out" / "raw" / "preprocess"
        frame = pd.read_csv(directory / "raw.csv")
        assert list(frame.columns)[-1] == "label"
        assert frame.shape[1] == 4
        assert np.all(np.isfinite(frame.to_numpy()))
        config = parse_run_config(directory / "config.nml")
        assert config.seed == 3
        assert config.preprocess.target_features == 3
        metadata = json.loads((directory / "metadata.json").read_text())
        assert metadata["command"] == "preprocess"
        assert metadata["pyqkernel_version"] == __version__

    def test_reproducible(self, tmp_path, raw_csv):
        """Test that a second run writes byte-identical results."""
        directory = tmp_path / "out" / "raw" / "preprocess"
        self.run(tmp_path, raw_csv)
        first = {p.name: p.read_bytes() for p in directory.glob("*") if p.suffix != ".json"}
        self.run(tmp_path, raw_csv)
        second = {p.name: p.read_bytes() for p in directory.glob("*") if p.suffix != ".json"}
        assert first == second

    def test_config_file(self, tmp_path, raw_csv):
        """Test a run driven by a config file."""
        config = tmp_path / "run.nml"
        config.write_text(
            f"&RUN outdir = '{tmp_path / 'out'}' /\n"
            f"&DATASET path = '{raw_csv}', label_column = 'species', dataset_id = 'iris' /\n"
        )
        assert main(["preprocess", "--config", str(config)]) == 0
        assert (tmp_path / "out" / "iris" / "preprocess" / "iris.csv").is_file()


class TestErrors:
    """Test class for failing runs."""

    def test_missing_dataset(self, tmp_path, capsys):
        """Test that a run without datasets names the failing stage."""
        assert main(["preprocess", "--outdir", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "pyqkernel preprocess: error in stage 'preprocess'" in err
        assert "No &DATASET group" in err

    def test_invalid_override(self, tmp_path, capsys):
        """Test that configuration errors are reported as the config stage."""
        assert main(["sweep", "--outdir", str(tmp_path), "--set", "RUN.folds=1"]) == 1
        assert "error in stage 'config'" in capsys.readouterr().err

    def test_invalid_seed_option(self, tmp_path, capsys):
        """Test that invalid command-line options name the option."""
        assert main(["sweep", "--outdir", str(tmp_path), "--seed", "-1"]) == 1
        assert "--seed: " in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        """Test a config path that does not exist."""
        assert main(["sweep", "--config", str(tmp_path / "missing.nml")]) == 1
        assert "Config file not found" in capsys.readouterr().err

    def test_single_class_dataset(self, tmp_path, capsys):
        """Test that preprocessing failures name their pipeline stage."""
        path = tmp_path / "one.csv"
        pd.DataFrame({"a": [1.0, 2.0, np.nan, np.nan], "label": [0, 0, 1, 1]}).to_csv(path, index=False)
        assert main(["preprocess", "--outdir", str(tmp_path), *dataset_args(path)]) == 1
        assert "error in stage 'balance'" in capsys.readouterr().err


class TestGdCommand:
    """Test class for the gd command."""

    def write_matrix(self, path, matrix):
        """Write a matrix as a headerless CSV."""
        pd.DataFrame(matrix).to_csv(path, header=False, index=False)
        return str(path)

    def test_matrix_files(self, tmp_path):
        """Test the geometric difference of two matrix files."""
        rng = np.random.default_rng(0)
        A = rng.normal(size=(6, 6))
        K = A @ A.T
        classical = self.write_matrix(tmp_path / "classical.csv", K)
        quantum = self.write_matrix(tmp_path / "quantum.csv", 3.0 * K)
        assert main(["gd", classical, quantum, "--outdir", str(tmp_path / "out")]) == 0
        frame = pd.read_csv(tmp_path / "out" / "quantum" / "gd" / "gd.csv")
        assert frame["n"].iloc[0] == 6
        assert frame["g"].iloc[0] == pytest.approx(1.0, abs=1e-6)

    def test_missing_source(self, tmp_path, capsys):
        """Test a source that is neither a file nor a keyword."""
        assert main(["gd", "classical", str(tmp_path / "nope.csv"), "--outdir", str(tmp_path)]) == 1
        assert "neither a file nor" in capsys.readouterr().err

    def test_keywords(self, tmp_path, toy_csv, small_dataset):
        """Test Gram matrices built from the configured kernels."""
        args = [
            "gd", "classical", "quantum",
            "--outdir", str(tmp_path / "out"),
            *dataset_args(toy_csv, "DATASET.preprocessed=.TRUE.", "QUANTUMKERNEL.trotter_steps=1"),
        ]
        assert main(args) == 0
        frame = pd.read_csv(tmp_path / "out" / "toy" / "gd" / "gd.csv")
        assert frame["n"].iloc[0] == small_dataset.n_points
        assert frame["g"].iloc[0] > 0


class TestRelabelCommand:
    """Test class for the relabel command."""

    def test_relabeled_file(self, tmp_path, toy_csv, small_dataset):
        """Test that relabeling keeps features and writes binary labels."""
        args = [
            "relabel",
            "--outdir", str(tmp_path / "out"),
            *dataset_args(toy_csv, "DATASET.preprocessed=.TRUE.", "QUANTUMKERNEL.basis='distance'"),
        ]
        assert main(args) == 0
        frame = pd.read_csv(tmp_path / "out" / "toy" / "relabel" / "toy.csv")
        np.testing.assert_allclose(frame.drop(columns="label").to_numpy(), small_dataset.X)
        assert set(frame["label"]) <= {0, 1}


class TestAnalyzeCommand:
    """Test class for the analyze command."""

    def test_no_result_files(self, tmp_path, capsys):
        """Test that result files are required."""
        assert main(["analyze", "--outdir", str(tmp_path)]) == 1
        assert "ANALYSIS.results" in capsys.readouterr().err

    def test_empty_results(self, tmp_path, capsys):
        """Test that an empty result file fails the analyze stage."""
        csv_path, _ = write_records([], tmp_path / "results.csv")
        assert main(["analyze", str(csv_path), "--outdir", str(tmp_path)]) == 1
        assert "error in stage 'analyze'" in capsys.readouterr().err

    def test_zero_byte_results(self, tmp_path, capsys):
        """Test that a zero-byte result file fails the analyze stage."""
        path = tmp_path / "results.csv"
        path.write_text("")
        assert main(["analyze", str(path), "--outdir", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "error in stage 'analyze'" in err
        assert "no records" in err

    def test_tables(self, tmp_path):
        """Test the tables written for a small result file."""
        records = [
            ResultRecord("d", basis, t, 1, gamma, 1, C, 0, "mean", 0.5 + 0.1 * t, 0.5)
            for basis, gamma in (("inner", 0.0), ("distance", 1.0))
            for t in (0.5, 1.0, 2.0)
            for C in (1.0, 10.0)
        ]
        csv_path, jsonl_path = write_records(records, tmp_path / "results.csv")
        args = [
            "analyze", str(csv_path),
            "--outdir", str(tmp_path / "out"),
            "--set", "ANALYSIS.metrics='acc_test'",
            "--set", "ANALYSIS.hyperparameters='t', 'C'",
        ]
        assert main(args) == 0
        directory = tmp_path / "out" / "all" / "analyze"
        assert sorted(p.name for p in directory.glob("*.csv")) == [
            "importance_acc_test.csv",
            "marginals_C_acc_test.csv",
            "marginals_basis-gamma-optimized_acc_test.csv",
            "marginals_t_acc_test.csv",
        ]
        marginal = pd.read_csv(directory / "marginals_t_acc_test.csv")
        np.testing.assert_allclose(marginal["mean"], [0.55, 0.6, 0.7])
        assert main([*args[:1], str(jsonl_path), *args[2:]]) == 0


@pytest.mark.slow
class TestSearchCommands:
    """Test class for the sweep and pipeline commands."""

    def test_sweep(self, tmp_path, toy_csv):
        """Test a one-point sweep with its classical baselines."""
        args = [
            "sweep",
            "--outdir", str(tmp_path / "out"),
            "--set", "RUN.folds=0",
            *small_grid_args(),
            *dataset_args(toy_csv, "DATASET.preprocessed=.TRUE."),
        ]
        assert main(args) == 0
        directory = tmp_path / "out" / "toy" / "sweep"
        results = pd.read_csv(directory / "results.csv")
        assert len(results) == 1
        assert results["basis"].iloc[0] == "inner"
        assert 0.0 <= results["acc_test"].iloc[0] <= 1.0
        assert np.isnan(results["acc_cv"].iloc[0])
        classical = pd.read_csv(directory / "classical.csv")
        assert len(classical) > 0
        assert (directory / "config.nml").is_file()

    def test_sweep_permutations(self, tmp_path, toy_csv):
        """Test that every feature ordering is swept."""
        args = [
            "sweep",
            "--outdir", str(tmp_path / "out"),
            "--set", "RUN.folds=0",
            "--set", "RUN.permutations=.TRUE.",
            *small_grid_args(),
            *dataset_args(toy_csv, "DATASET.preprocessed=.TRUE."),
        ]
        assert main(args) == 0
        results = pd.read_csv(tmp_path / "out" / "toy" / "sweep" / "results.csv")
        assert len(results) == 6
        assert results["dataset_id"].str.startswith("toy@").all()

    def test_pipeline(self, tmp_path, toy_csv):
        """Test a reduced search with a single t and Trotter step count."""
        args = [
            "pipeline",
            "--outdir", str(tmp_path / "out"),
            "--set", "RUN.folds=0",
            "--set", "PIPELINESPEC.n_t=1",
            "--set", "PIPELINESPEC.trotter_steps=1",
            "--set", "PIPELINESPEC.gamma_values=1.0",
            "--set", "PIPELINESPEC.C_values=1.0",
            "--set", "PIPELINESPEC.bases='inner'",
            *dataset_args(toy_csv, "DATASET.preprocessed=.TRUE."),
        ]
        assert main(args) == 0
        results = pd.read_csv(tmp_path / "out" / "toy" / "pipeline" / "results.csv")
        assert len(results) > 0
        assert set(results["T"]) == {1}
