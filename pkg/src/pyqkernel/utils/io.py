"""
Atomic file writers.

Every output is first written to a temporary file in the destination
directory and then moved into place with :func:`os.replace`, so readers
never observe a partially written file.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import pandas as pd


def atomic_write_text(path: str | os.PathLike[str], content: str) -> Path:
    """
    Write ``content`` to ``path`` through a temporary file and rename.

    Parameters
    ----------
    path : str or PathLike
        Destination file; parent directories are created.
    content : str
        Text to write (UTF-8, ``\\n`` line endings).

    Returns
    -------
    Path
        Absolute path of the written file.

    Raises
    ------
    OSError
        If the file cannot be written. The concrete subclass is preserved,
        so a PermissionError, IsADirectoryError, etc. is re-raised as itself
        with added context.
    """
    target = Path(path).absolute()
    tmp_name = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(
            dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
        )
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(content)
        os.replace(tmp_name, target)
    except OSError as e:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise type(e)(f"Failed to write {target}: {e}") from e
    return target


def atomic_write_frame(
    frame: pd.DataFrame, path: str | os.PathLike[str], float_format: str | None = None
) -> Path:
    """Write a DataFrame as CSV (no index) with :func:`atomic_write_text`."""
    content = frame.to_csv(index=False, lineterminator="\n", float_format=float_format)
    return atomic_write_text(path, content)
