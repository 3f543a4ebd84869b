r"""
Canonical builder for namelist groups of run-config snapshots.

``NamelistRecord`` collects fields, formats values by type, omits ``None``
values and produces deterministic single-line groups that ``f90nml`` reads
back into the same values.

Formatting rules
-----------------
* Group shape: ``&GROUP key1 = v1 key2 = v2 ... /\n``
* Fields separated by **spaces** (no inter-field commas).
* String values are single-quoted: ``basis = 'inner'``
* Floats use ``repr`` so they round-trip exactly: ``t = 0.015625``
* Boolean values use Fortran literals: ``.TRUE.`` / ``.FALSE.``
* List values are **comma-separated** internally: ``t_values = 0.5, 1.0``
* ``None`` values are silently skipped, never emitted.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

# Scalar types accepted by the builder.
_Scalar = str | int | float | bool


class NamelistRecord:
    """Builder for a single namelist group."""

    def __init__(self, group: str) -> None:
        self._group = group
        self._fields: list[tuple[str, str]] = []

    def add_field(self, key: str, value: _Scalar | None) -> NamelistRecord:
        """Append a scalar field, skipping ``None``.

        Parameters
        ----------
        key : str
            Field name (e.g. ``"seed"``).
        value : str | int | float | bool | None
            The value.  ``None`` => field is omitted.  ``bool`` =>
            ``.TRUE.`` / ``.FALSE.``.  ``str`` => single-quoted.

        Returns
        -------
        NamelistRecord
            ``self``, for chaining.
        """
        if value is None:
            return self
        self._fields.append((key, _format_scalar(value)))
        return self

    def add_list_field(
        self, key: str, values: Sequence[_Scalar] | None
    ) -> NamelistRecord:
        """Append a list field, skipping ``None``.

        Each element is formatted individually and joined with ``", "``.

        Returns
        -------
        NamelistRecord
            ``self``, for chaining.
        """
        if values is None:
            return self
        formatted = ", ".join(_format_scalar(v) for v in values)
        self._fields.append((key, formatted))
        return self

    def add_params(self, params: dict[str, object]) -> NamelistRecord:
        """Append every entry of a ``to_dict()`` mapping; empty lists are skipped."""
        for key, value in params.items():
            if isinstance(value, tuple | list):
                if not value:
                    continue
                self.add_list_field(key, list(value))  # type: ignore[arg-type]
            else:
                self.add_field(key, value)  # type: ignore[arg-type]
        return self

    def build(self) -> str:
        r"""Render the namelist group.

        Returns
        -------
        str
            A single line ``"&GROUP field1 field2 ... /\n"``.

        Examples
        --------
        >>> NamelistRecord("RUN").add_field("seed", 7).add_field("outdir", "out").build()
        "&RUN seed = 7 outdir = 'out' /\n"
        """
        parts: list[str] = [f"&{self._group}"]
        for key, formatted_value in self._fields:
            parts.append(f"{key} = {formatted_value}")
        return " ".join(parts) + " /\n"


def _format_scalar(value: _Scalar) -> str:
    """Format a single scalar value for a namelist.

    Examples
    --------
    >>> _format_scalar(True), _format_scalar(0.1), _format_scalar("mean")
    ('.TRUE.', '0.1', "'mean'")
    """
    # bool must be checked before int (bool is a subclass of int).
    if isinstance(value, bool | np.bool_):
        return ".TRUE." if value else ".FALSE."
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, int | np.integer):
        return str(int(value))
    return repr(float(value))
