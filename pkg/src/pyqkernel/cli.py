"""
Command-line interface.

``pyqkernel <command> --config run.nml [options]`` with the commands
``preprocess``, ``sweep``, ``gd``, ``relabel``, ``pipeline`` and ``analyze``.
Outputs go to ``<outdir>/<dataset_id>/<command>/`` together with a
``config.nml`` snapshot of the effective configuration and a
``metadata.json`` file holding everything that varies between runs
(timestamps, version, command line).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Iterator, Sequence
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analysis import export_analysis
from .data import Dataset, feature_permutations, load_canonical, load_csv, preprocess, write_csv
from .exceptions import ConfigError, PipelineError
from .gd import geometric_difference, relabel_dataset
from .kernels import GramMatrix, quantum_gram, rescale_trace
from .parsers.config_parser import DatasetSource, RunConfig, RunConfigParser
from .simulator import embed_batch
from .sweep import (
    ResultRecord,
    ResultSink,
    read_records,
    run_classical_sweep,
    run_pipeline,
    run_sweep,
    write_records,
)
from .utils.io import atomic_write_frame, atomic_write_text

logger = logging.getLogger("pyqkernel")

COMMANDS = ("preprocess", "sweep", "gd", "relabel", "pipeline", "analyze")
GRAM_KEYWORDS = ("classical", "quantum")

#: Dataset id of outputs that span several datasets.
ALL_DATASETS = "all"


def output_dir(config: RunConfig, dataset_id: str, command: str) -> Path:
    """Return ``<outdir>/<dataset_id>/<command>``."""
    return Path(config.outdir) / dataset_id / command


def write_provenance(directory: Path, config: RunConfig, command: str) -> None:
    """Store the config snapshot and the run metadata next to the outputs."""
    atomic_write_text(directory / "config.nml", config.to_namelist())
    metadata = {
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(),
        "pyqkernel_version": __version__,
        "argv": sys.argv[1:],
    }
    atomic_write_text(directory / "metadata.json", json.dumps(metadata, indent=2) + "\n")


def load_dataset(source: DatasetSource, config: RunConfig) -> Dataset:
    """Load a source and run the preprocessing pipeline unless it is canonical."""
    if source.preprocessed:
        return load_canonical(source.path, dataset_id=source.resolved_id)
    raw = load_csv(
        source.path,
        source.label_column,
        classes=source.classes,
        dataset_id=source.resolved_id,
    )
    return preprocess(raw, seed=config.seed, **config.preprocess.to_dict())


def _datasets(config: RunConfig) -> Iterator[Dataset]:
    if not config.datasets:
        raise ConfigError("No &DATASET group in the configuration.", field="DATASET")
    for source in config.datasets:
        yield load_dataset(source, config)


def cmd_preprocess(config: RunConfig) -> list[Path]:
    """Write the canonical file of every dataset."""
    written = []
    for ds in _datasets(config):
        directory = output_dir(config, ds.dataset_id, "preprocess")
        written.append(write_csv(ds, directory / f"{ds.dataset_id}.csv"))
        write_provenance(directory, config, "preprocess")
    return written


def cmd_sweep(config: RunConfig) -> list[Path]:
    """Run the quantum grid and the classical baselines on every dataset."""
    written = []
    for ds in _datasets(config):
        directory = output_dir(config, ds.dataset_id, "sweep")
        variants = (
            [
                replace(p, dataset_id=f"{ds.dataset_id}@{''.join(map(str, perm))}")
                for perm, p in feature_permutations(ds)
            ]
            if config.permutations
            else [ds]
        )
        sink = ResultSink(directory / "results.csv", flush_every=1000)
        for variant in variants:
            run_sweep(
                variant,
                config.grid,
                folds=config.folds,
                train_fraction=config.train_fraction,
                seed=config.seed,
                tol=config.tol,
                n_jobs=config.workers,
                sink=sink,
            )
        classical = run_classical_sweep(
            ds,
            gamma_values=config.grid.gamma_values,
            C_values=config.grid.C_values,
            folds=config.folds,
            train_fraction=config.train_fraction,
            seed=config.seed,
            tol=config.tol,
            n_jobs=config.workers,
        )
        written.append(directory / "results.csv")
        written.extend(write_records(classical, directory / "classical.csv")[:1])
        write_provenance(directory, config, "sweep")
    return written


def cmd_pipeline(config: RunConfig) -> list[Path]:
    """Run the reduced search on every dataset."""
    written = []
    for ds in _datasets(config):
        directory = output_dir(config, ds.dataset_id, "pipeline")
        records = run_pipeline(
            ds,
            config.pipeline,
            folds=config.folds,
            train_fraction=config.train_fraction,
            seed=config.seed,
            tol=config.tol,
            n_jobs=config.workers,
        )
        written.extend(write_records(records, directory / "results.csv")[:1])
        write_provenance(directory, config, "pipeline")
    return written


def _full_grams(ds: Dataset, config: RunConfig) -> tuple[GramMatrix, GramMatrix]:
    """Trace-normalized classical and quantum Gram matrices over the whole dataset."""
    K_C = config.classical.gram(ds.X)
    states = embed_batch(ds.X, config.feature_map, n_jobs=config.workers)
    K_Q = rescale_trace(quantum_gram(states, config.kernel, n_jobs=config.workers))
    return K_C, K_Q


def cmd_relabel(config: RunConfig) -> list[Path]:
    """Replace the labels of every dataset with quantum-favorable ones."""
    written = []
    for ds in _datasets(config):
        K_C, K_Q = _full_grams(ds, config)
        relabeled = relabel_dataset(ds, K_C, K_Q, config.relabel)
        directory = output_dir(config, ds.dataset_id, "relabel")
        written.append(write_csv(relabeled, directory / f"{ds.dataset_id}.csv"))
        write_provenance(directory, config, "relabel")
        logger.info("Relabeled %s: class counts %s", ds.dataset_id, relabeled.class_counts)
    return written


def _read_matrix(path: str) -> GramMatrix:
    values = pd.read_csv(path, header=None).to_numpy(dtype=np.float64)
    return GramMatrix(values, kind=f"file:{Path(path).name}")


def cmd_gd(config: RunConfig, classical_source: str, quantum_source: str) -> list[Path]:
    """
    Geometric difference between two Gram matrices.

    Each source is a CSV matrix file or one of the keywords ``classical`` /
    ``quantum``, which build the kernel of ``&CLASSICALKERNEL`` /
    ``&QUANTUMKERNEL`` on each configured dataset.
    """
    sources = (classical_source, quantum_source)
    for source in sources:
        if source not in GRAM_KEYWORDS and not Path(source).is_file():
            raise FileNotFoundError(f"Gram source '{source}' is neither a file nor {GRAM_KEYWORDS}.")

    def report(dataset_id: str, grams: dict[str, GramMatrix]) -> Path:
        K_C, K_Q = (rescale_trace(grams[s]) for s in sources)
        result = geometric_difference(K_C, K_Q)
        directory = output_dir(config, dataset_id, "gd")
        frame = pd.DataFrame(
            [
                {
                    "dataset_id": dataset_id,
                    "classical_source": classical_source,
                    "quantum_source": quantum_source,
                    "n": K_C.n,
                    "g": result.g,
                    "condition_diagnostic": result.condition_diagnostic,
                }
            ]
        )
        path = atomic_write_frame(frame, directory / "gd.csv")
        write_provenance(directory, config, "gd")
        logger.info("g(%s || %s) on %s = %.6g", *sources, dataset_id, result.g)
        return path

    files = {s: _read_matrix(s) for s in sources if s not in GRAM_KEYWORDS}
    if len(files) == 2 or not any(s in GRAM_KEYWORDS for s in sources):
        return [report(Path(quantum_source).stem, files)]
    written = []
    for ds in _datasets(config):
        K_C, K_Q = _full_grams(ds, config)
        grams = {**files, "classical": K_C, "quantum": K_Q}
        written.append(report(ds.dataset_id, grams))
    return written


def cmd_analyze(config: RunConfig, results: Sequence[str] = ()) -> list[Path]:
    """Tabulate marginals, importances and scaling for the given result files."""
    paths = list(results) or list(config.analysis.results)
    if not paths:
        raise ConfigError("No result files given.", field="ANALYSIS.results")
    records: list[ResultRecord] = []
    for path in paths:
        records.extend(read_records(path))
    if not records:
        raise PipelineError("analyze", "no records in " + ", ".join(map(str, paths)) + ".")
    datasets = {ds.dataset_id: ds for ds in _datasets(config)} if config.datasets else None
    directory = output_dir(config, ALL_DATASETS, "analyze")
    written = export_analysis(
        records,
        directory,
        metrics=config.analysis.metrics,
        hyperparameters=config.analysis.hyperparameters,
        datasets=datasets,
        trim_datasets=config.analysis.trim_datasets,
        trim_fraction=config.analysis.trim_fraction,
        seed=config.seed,
        n_jobs=config.workers,
    )
    write_provenance(directory, config, "analyze")
    return written


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser of the ``pyqkernel`` command."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="namelist run configuration")
    common.add_argument("--workers", type=int, help="worker processes (-1: all cores)")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--outdir", help="root output directory")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="GROUP.KEY=VALUE",
        help="override a configuration entry (repeatable)",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="pyqkernel", description="Quantum kernel hyperparameter studies."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("preprocess", parents=[common], help="write canonical datasets")
    commands.add_parser("sweep", parents=[common], help="run the full hyperparameter grid")
    gd = commands.add_parser("gd", parents=[common], help="geometric difference of two kernels")
    gd.add_argument("classical", help="CSV matrix file or 'classical'/'quantum'")
    gd.add_argument("quantum", help="CSV matrix file or 'classical'/'quantum'")
    commands.add_parser("relabel", parents=[common], help="write quantum-favorable labels")
    commands.add_parser("pipeline", parents=[common], help="run the reduced search")
    analyze = commands.add_parser("analyze", parents=[common], help="analyze result files")
    analyze.add_argument("results", nargs="*", help="result CSV/JSONL files")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Parse the config file (if any) and apply the command-line overrides."""
    parser = RunConfigParser()
    if args.config is not None:
        config = parser.parse_file(args.config, overrides=args.overrides)
    else:
        config = parser.parse_string("", overrides=args.overrides)
    for name in ("workers", "seed", "outdir"):
        value = getattr(args, name)
        if value is not None:
            try:
                setattr(config, name, value)
            except ValueError as e:
                raise ConfigError(str(e), field=f"--{name}") from e
    return config


def _dispatch(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    handlers: dict[str, Callable[[], list[Path]]] = {
        "preprocess": lambda: cmd_preprocess(config),
        "sweep": lambda: cmd_sweep(config),
        "gd": lambda: cmd_gd(config, args.classical, args.quantum),
        "relabel": lambda: cmd_relabel(config),
        "pipeline": lambda: cmd_pipeline(config),
        "analyze": lambda: cmd_analyze(config, args.results),
    }
    return handlers[args.command]()


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run the command line.

    Returns
    -------
    int
        0 on success, 1 when a stage fails (the error names the stage).
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    stage = "config"
    try:
        config = load_config(args)
        stage = args.command
        written = _dispatch(args, config)
    except PipelineError as e:
        logger.error("%s failed at stage %s: %s", args.command, e.stage, e)
        print(f"pyqkernel {args.command}: error in stage '{e.stage}': {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, OSError) as e:
        logger.error("%s failed at stage %s: %s", args.command, stage, e)
        print(f"pyqkernel {args.command}: error in stage '{stage}': {e}", file=sys.stderr)
        return 1
    for path in written:
        logger.info("Wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
