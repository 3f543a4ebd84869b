"""
Run-configuration parser.

Run configurations are Fortran namelist files read with ``f90nml``. Each group
maps to one parameter object:

``&RUN``             output directory, global seed, workers, CV folds, ...
``&DATASET``         one input file (repeatable)
``&PREPROCESS``      :class:`~pyqkernel.data.PreprocessParams`
``&GRIDSPEC``        :class:`~pyqkernel.sweep.GridSpec`
``&PIPELINESPEC``    :class:`~pyqkernel.sweep.PipelineSpec`
``&RELABELPARAMS``   :class:`~pyqkernel.gd.RelabelParams`
``&QUANTUMKERNEL``   feature map and kernel used by ``gd`` and ``relabel``
``&CLASSICALKERNEL`` classical kernel used by ``gd`` and ``relabel``
``&ANALYSIS``        :class:`~pyqkernel.analysis.AnalysisParams`

Namelist keys are case-insensitive, so the Trotter-step fields are spelled
``trotter_steps`` / ``trotter_values``.
"""

from __future__ import annotations

import inspect
import re
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any, ClassVar

import f90nml  # type: ignore

from .._base_component import ParamsComponent
from ..analysis import AnalysisParams
from ..data import PreprocessParams
from ..exceptions import ConfigError
from ..gd import RelabelParams
from ..kernels import KernelParams
from ..simulator import FeatureMapParams
from ..sweep import ClassicalBaseline, GridSpec, PipelineSpec
from ..utils.namelist import NamelistRecord

# Namelist group constants
GROUP_RUN = "RUN"
GROUP_DATASET = "DATASET"
GROUP_PREPROCESS = "PREPROCESS"
GROUP_GRIDSPEC = "GRIDSPEC"
GROUP_PIPELINESPEC = "PIPELINESPEC"
GROUP_RELABELPARAMS = "RELABELPARAMS"
GROUP_QUANTUMKERNEL = "QUANTUMKERNEL"
GROUP_CLASSICALKERNEL = "CLASSICALKERNEL"
GROUP_ANALYSIS = "ANALYSIS"

GROUPS = (
    GROUP_RUN,
    GROUP_DATASET,
    GROUP_PREPROCESS,
    GROUP_GRIDSPEC,
    GROUP_PIPELINESPEC,
    GROUP_RELABELPARAMS,
    GROUP_QUANTUMKERNEL,
    GROUP_CLASSICALKERNEL,
    GROUP_ANALYSIS,
)

# Spellings of fields whose names only differ by case.
_ALIASES = {"trotter_steps": "T", "trotter_values": "T_values"}
_ALIASES_REVERSED = {v: k for k, v in _ALIASES.items()}


class DatasetSource(ParamsComponent):
    """
    One dataset input of a run.

    Parameters
    ----------
    path : str
        CSV file; must exist.
    label_column : str, default="label"
        Label column of the file.
    classes : sequence of two values, optional
        Label values mapped to 0 and 1 (others are dropped).
    dataset_id : str, optional
        Defaults to the file stem.
    preprocessed : bool, default=False
        The file is a canonical dataset (e.g. written by ``preprocess`` or
        ``relabel``) and is used as is.
    """

    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset({"classes"})

    def __init__(
        self,
        path: str,
        label_column: str = "label",
        classes: Sequence[Any] | None = None,
        dataset_id: str | None = None,
        preprocessed: bool = False,
    ):
        self.path = str(path)
        self.label_column = label_column
        self.classes = classes
        self.dataset_id = dataset_id
        self.preprocessed = preprocessed

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the dataset source.

        Raises
        ------
        FileNotFoundError
            If the file does not exist.
        ValueError
            If classes does not hold exactly two values.
        """
        if not Path(self.path).is_file():
            raise FileNotFoundError(f"DatasetSource: path '{self.path}' does not exist.")
        if self.classes is not None and len(self.classes) != 2:
            raise ValueError(
                f"DatasetSource: classes must hold two label values, got {list(self.classes)}."
            )

    @property
    def resolved_id(self) -> str:
        """Dataset id, falling back to the file stem."""
        return self.dataset_id or Path(self.path).stem


class RunConfig(ParamsComponent):
    """
    Complete configuration of a command-line run.

    Parameters
    ----------
    datasets : sequence of DatasetSource
        Inputs of the run.
    outdir : str, default="results"
        Root of the output tree ``<outdir>/<dataset_id>/<command>/``.
    seed : int, default=0
        Global seed of every stochastic stage.
    workers : int, default=1
        Worker processes.
    folds : int, default=5
        Cross-validation folds (0 disables CV).
    train_fraction : float, default=2/3
        Share of points used for training.
    tol : float, default=1e-3
        SMO tolerance.
    permutations : bool, default=False
        Sweep every feature ordering of each dataset.
    """

    _TUPLE_FIELDS: ClassVar[frozenset[str]] = frozenset({"datasets"})

    def __init__(
        self,
        datasets: Sequence[DatasetSource] = (),
        outdir: str = "results",
        seed: int = 0,
        workers: int = 1,
        folds: int = 5,
        train_fraction: float = 2 / 3,
        tol: float = 1e-3,
        permutations: bool = False,
        preprocess: PreprocessParams | None = None,
        grid: GridSpec | None = None,
        pipeline: PipelineSpec | None = None,
        relabel: RelabelParams | None = None,
        feature_map: FeatureMapParams | None = None,
        kernel: KernelParams | None = None,
        classical: ClassicalBaseline | None = None,
        analysis: AnalysisParams | None = None,
    ):
        self.datasets = datasets
        self.outdir = str(outdir)
        self.seed = seed
        self.workers = workers
        self.folds = folds
        self.train_fraction = train_fraction
        self.tol = tol
        self.permutations = permutations
        self.preprocess = preprocess or PreprocessParams()
        self.grid = grid or GridSpec()
        self.pipeline = pipeline or PipelineSpec()
        self.relabel = relabel or RelabelParams()
        self.feature_map = feature_map or FeatureMapParams()
        self.kernel = kernel or KernelParams()
        self.classical = classical or ClassicalBaseline("rbf")
        self.analysis = analysis or AnalysisParams()

        self._validate()
        self._initialized = True

    def _validate(self) -> None:
        """Validate the run-level settings.

        Raises
        ------
        TypeError
            If a dataset entry is not a DatasetSource.
        ValueError
            If a number is out of range or dataset ids repeat.
        """
        for source in self.datasets:
            if not isinstance(source, DatasetSource):
                raise TypeError(
                    f"RunConfig: datasets must hold DatasetSource objects, got {type(source).__name__}."
                )
        ids = [s.resolved_id for s in self.datasets]
        if len(set(ids)) != len(ids):
            raise ValueError(f"RunConfig: dataset ids must be unique, got {ids}.")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"RunConfig: seed must be an integer >= 0, got {self.seed!r}.")
        if self.workers == 0 or self.workers < -1:
            raise ValueError(f"RunConfig: workers must be >= 1 or -1, got {self.workers}.")
        if self.folds < 0 or self.folds == 1:
            raise ValueError(f"RunConfig: folds must be 0 or >= 2, got {self.folds}.")
        if not 0 < self.train_fraction < 1:
            raise ValueError(
                f"RunConfig: train_fraction must be in (0, 1), got {self.train_fraction}."
            )
        if not self.tol > 0:
            raise ValueError(f"RunConfig: tol must be > 0, got {self.tol}.")

    def to_namelist(self) -> str:
        """
        Render the configuration as namelist text.

        Parsing the returned text gives back an equal configuration.
        """
        lines = [
            NamelistRecord(GROUP_RUN)
            .add_field("outdir", self.outdir)
            .add_field("seed", self.seed)
            .add_field("workers", self.workers)
            .add_field("folds", self.folds)
            .add_field("train_fraction", self.train_fraction)
            .add_field("tol", self.tol)
            .add_field("permutations", self.permutations)
            .build()
        ]
        for source in self.datasets:
            lines.append(NamelistRecord(GROUP_DATASET).add_params(source.to_dict()).build())
        sections: list[tuple[str, dict[str, Any]]] = [
            (GROUP_PREPROCESS, self.preprocess.to_dict()),
            (GROUP_GRIDSPEC, self.grid.to_dict()),
            (GROUP_PIPELINESPEC, self.pipeline.to_dict()),
            (GROUP_RELABELPARAMS, self.relabel.to_dict()),
            (GROUP_QUANTUMKERNEL, {**self.feature_map.to_dict(), **self.kernel.to_dict()}),
            (GROUP_CLASSICALKERNEL, asdict(self.classical)),
            (GROUP_ANALYSIS, self.analysis.to_dict()),
        ]
        for group, params in sections:
            renamed = {_ALIASES_REVERSED.get(k, k): v for k, v in params.items()}
            lines.append(NamelistRecord(group).add_params(renamed).build())
        return "".join(lines)


def _key_map(target: Any) -> dict[str, str]:
    """Lowercase namelist key -> constructor argument name."""
    names = [
        name
        for name in inspect.signature(target).parameters
        if name not in ("self",)
    ]
    mapping = {name.lower(): name for name in names if name not in _ALIASES_REVERSED}
    mapping.update({alias: name for alias, name in _ALIASES.items() if name in names})
    return mapping


def _find_line(text: str, group: str, key: str | None = None, occurrence: int = 0) -> int | None:
    """1-based line of ``key`` inside the ``occurrence``-th ``&group`` (or of the group itself)."""
    group_pattern = re.compile(rf"^\s*&{re.escape(group)}\b", re.IGNORECASE)
    key_pattern = re.compile(rf"(^|[\s,&]){re.escape(key)}\s*(\(|=)", re.IGNORECASE) if key else None
    seen = -1
    inside = False
    for number, line in enumerate(text.splitlines(), start=1):
        if group_pattern.match(line):
            seen += 1
            inside = seen == occurrence
            if inside and key_pattern is None:
                return number
        elif re.match(r"^\s*&\w+", line):
            inside = False
        if inside and key_pattern is not None and key_pattern.search(line):
            return number
    return None


def _as_plain(value: Any) -> Any:
    if isinstance(value, list):
        return [_as_plain(v) for v in value]
    if hasattr(value, "todict"):
        return {k: _as_plain(v) for k, v in value.todict().items()}
    return value


class RunConfigParser:
    """Parser for namelist run configurations.

    Groups are dispatched to one builder each; unknown groups are skipped
    with a warning, unknown keys and invalid values raise
    :class:`~pyqkernel.exceptions.ConfigError` naming the field and its line.
    """

    def __init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        """Reset parser state for parsing a new file."""
        self._text = ""
        self._base_dir = Path.cwd()
        self._run: dict[str, Any] = {}
        self._datasets: list[DatasetSource] = []
        self._components: dict[str, Any] = {}

    def parse_file(
        self, file_path: str | Path, overrides: Iterable[str] = ()
    ) -> RunConfig:
        """
        Parse a configuration file.

        Parameters
        ----------
        file_path : str | Path
            Namelist file. Relative dataset paths are resolved against its
            directory.
        overrides : iterable of str
            ``GROUP.KEY=VALUE`` assignments applied on top of the file.

        Returns
        -------
        RunConfig

        Raises
        ------
        FileNotFoundError
            If the file does not exist.
        ConfigError
            If the file is malformed or a value is invalid.
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"Config file not found: {file_path}")
        text = file_path.read_text(encoding="utf-8")
        return self.parse_string(text, base_dir=file_path.parent, overrides=overrides)

    def parse_string(
        self,
        text: str,
        base_dir: str | Path | None = None,
        overrides: Iterable[str] = (),
    ) -> RunConfig:
        """Parse configuration text; see :meth:`parse_file`."""
        self.reset()
        self._text = text
        self._base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        try:
            nml = f90nml.reads(text) if text.strip() else f90nml.Namelist()
        except Exception as e:
            raise ConfigError(f"Failed to parse run config: {e}") from e

        groups: dict[str, list[dict[str, Any]]] = {}
        for group_name, group_data in nml.items():
            entries = group_data if isinstance(group_data, list) else [group_data]
            groups.setdefault(group_name.upper(), []).extend(_as_plain(e) for e in entries)
        for override in overrides:
            self._apply_override(groups, override)
        self._parse_groups(groups)

        try:
            return RunConfig(
                datasets=self._datasets,
                **self._run,
                **self._components,
            )
        except (TypeError, ValueError) as e:
            field = next((k for k in self._run if k in str(e)), None)
            raise ConfigError(
                str(e),
                field=f"{GROUP_RUN}.{field}" if field else GROUP_RUN,
                line=_find_line(self._text, GROUP_RUN, field),
            ) from e

    def _apply_override(self, groups: dict[str, list[dict[str, Any]]], override: str) -> None:
        match = re.fullmatch(r"\s*(\w+)\.(\w+)\s*=(.*)", override)
        if match is None:
            raise ConfigError(f"Override '{override}' is not of the form GROUP.KEY=VALUE.")
        group, key, raw = match.group(1).upper(), match.group(2).lower(), match.group(3)
        if group not in GROUPS:
            raise ConfigError(f"Unknown group in override '{override}'.", field=group)
        try:
            value = _as_plain(f90nml.reads(f"&override value = {raw} /\n")["override"]["value"])
        except Exception as e:
            raise ConfigError(f"Cannot parse value '{raw}': {e}", field=f"{group}.{key}") from e
        entries = groups.setdefault(group, [])
        if not entries:
            entries.append({})
        for entry in entries:
            entry[key] = value

    def _parse_groups(self, groups: dict[str, list[dict[str, Any]]]) -> None:
        # Create a dispatch table for group handlers
        handlers = {
            GROUP_RUN: self._parse_run_group,
            GROUP_DATASET: self._parse_dataset_group,
            GROUP_PREPROCESS: self._component_parser("preprocess", PreprocessParams),
            GROUP_GRIDSPEC: self._component_parser("grid", GridSpec),
            GROUP_PIPELINESPEC: self._component_parser("pipeline", PipelineSpec),
            GROUP_RELABELPARAMS: self._component_parser("relabel", RelabelParams),
            GROUP_QUANTUMKERNEL: self._parse_quantum_group,
            GROUP_CLASSICALKERNEL: self._component_parser("classical", ClassicalBaseline),
            GROUP_ANALYSIS: self._component_parser("analysis", AnalysisParams),
        }
        for group, entries in groups.items():
            if group not in handlers:
                warnings.warn(
                    f"Unknown group '&{group}' encountered, skipping.",
                    UserWarning,
                    stacklevel=3,
                )
                continue
            if group != GROUP_DATASET and len(entries) > 1:
                raise ConfigError(
                    f"Group &{group} may appear only once.",
                    field=group,
                    line=_find_line(self._text, group, occurrence=1),
                )
            for occurrence, entry in enumerate(entries):
                handlers[group](entry, occurrence)

    def _kwargs(
        self, group: str, entry: dict[str, Any], target: Any, occurrence: int = 0
    ) -> dict[str, Any]:
        mapping = _key_map(target)
        tuple_fields = getattr(target, "_TUPLE_FIELDS", frozenset())
        kwargs = {}
        for key, value in entry.items():
            name = mapping.get(key.lower())
            if name is None:
                raise ConfigError(
                    f"Unknown key '{key}', expected one of {sorted(mapping)}.",
                    field=f"{group}.{key}",
                    line=_find_line(self._text, group, key, occurrence),
                )
            if name in tuple_fields and value is not None and not isinstance(value, list):
                value = [value]
            kwargs[name] = value
        return kwargs

    def _build(self, group: str, target: Any, kwargs: dict[str, Any], occurrence: int = 0) -> Any:
        try:
            return target(**kwargs)
        except (TypeError, ValueError, FileNotFoundError) as e:
            message = str(e)
            name = next(
                (k for k in sorted(kwargs, key=len, reverse=True) if re.search(rf"\b{k}\b", message)),
                None,
            )
            key = _ALIASES_REVERSED.get(name, name) if name else None
            raise ConfigError(
                message,
                field=f"{group}.{key}" if key else group,
                line=_find_line(self._text, group, key, occurrence),
            ) from e

    def _component_parser(self, attribute: str, target: Any) -> Any:
        group = {
            "preprocess": GROUP_PREPROCESS,
            "grid": GROUP_GRIDSPEC,
            "pipeline": GROUP_PIPELINESPEC,
            "relabel": GROUP_RELABELPARAMS,
            "classical": GROUP_CLASSICALKERNEL,
            "analysis": GROUP_ANALYSIS,
        }[attribute]

        def parse(entry: dict[str, Any], occurrence: int) -> None:
            kwargs = self._kwargs(group, entry, target, occurrence)
            self._components[attribute] = self._build(group, target, kwargs, occurrence)

        return parse

    def _parse_run_group(self, entry: dict[str, Any], occurrence: int) -> None:
        """Parse the &RUN group."""
        allowed = {
            "outdir", "seed", "workers", "folds", "train_fraction", "tol", "permutations"
        }
        for key, value in entry.items():
            if key.lower() not in allowed:
                raise ConfigError(
                    f"Unknown key '{key}', expected one of {sorted(allowed)}.",
                    field=f"{GROUP_RUN}.{key}",
                    line=_find_line(self._text, GROUP_RUN, key),
                )
            self._run[key.lower()] = value

    def _parse_dataset_group(self, entry: dict[str, Any], occurrence: int) -> None:
        """Parse one &DATASET group; relative paths are resolved against the config directory."""
        kwargs = self._kwargs(GROUP_DATASET, entry, DatasetSource, occurrence)
        if "path" not in kwargs:
            raise ConfigError(
                "Missing required key 'path'.",
                field=f"{GROUP_DATASET}.path",
                line=_find_line(self._text, GROUP_DATASET, occurrence=occurrence),
            )
        path = Path(str(kwargs["path"]))
        kwargs["path"] = str(path if path.is_absolute() else (self._base_dir / path).resolve())
        self._datasets.append(self._build(GROUP_DATASET, DatasetSource, kwargs, occurrence))

    def _parse_quantum_group(self, entry: dict[str, Any], occurrence: int) -> None:
        """Parse &QUANTUMKERNEL into feature-map and kernel parameters."""
        fm_keys = _key_map(FeatureMapParams)
        kernel_keys = _key_map(KernelParams)
        fm_entry = {k: v for k, v in entry.items() if k.lower() in fm_keys}
        kernel_entry = {k: v for k, v in entry.items() if k.lower() not in fm_keys}
        fm_kwargs = self._kwargs(GROUP_QUANTUMKERNEL, fm_entry, FeatureMapParams)
        for key in kernel_entry:
            if key.lower() not in kernel_keys:
                raise ConfigError(
                    f"Unknown key '{key}', expected one of {sorted({*fm_keys, *kernel_keys})}.",
                    field=f"{GROUP_QUANTUMKERNEL}.{key}",
                    line=_find_line(self._text, GROUP_QUANTUMKERNEL, key),
                )
        kernel_kwargs = self._kwargs(GROUP_QUANTUMKERNEL, kernel_entry, KernelParams)
        self._components["feature_map"] = self._build(
            GROUP_QUANTUMKERNEL, FeatureMapParams, fm_kwargs
        )
        self._components["kernel"] = self._build(GROUP_QUANTUMKERNEL, KernelParams, kernel_kwargs)


def parse_run_config(
    file_path: str | Path, overrides: Iterable[str] = ()
) -> RunConfig:
    """
    Parse a run configuration file.

    Convenience function that creates a :class:`RunConfigParser` and parses
    the file in one call.

    Parameters
    ----------
    file_path : str | Path
        Namelist file.
    overrides : iterable of str
        ``GROUP.KEY=VALUE`` assignments applied on top of the file.

    Returns
    -------
    RunConfig

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ConfigError
        If the configuration is malformed.

    Examples
    --------
    >>> config = RunConfigParser().parse_string("&RUN seed = 3 /\\n&GRIDSPEC trotter_values = 1, 9 /\\n")
    >>> config.seed, config.grid.T_values
    (3, (1, 9))
    """
    return RunConfigParser().parse_file(file_path, overrides)
