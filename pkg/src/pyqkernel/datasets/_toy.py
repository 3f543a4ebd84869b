"""Synthetic two-class dataset used by the examples, doctests and tests."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.datasets import make_classification

from ..data import Dataset

_DESCR = """\
Toy two-blob dataset
====================

Two Gaussian clusters per class in ``n_informative`` dimensions, padded with
``n_noise`` pure-noise columns. Informative columns come first
(``informative_0``, ...), noise columns after (``noise_0``, ...).

**Labels**: 0 / 1, balanced.

**Sampling method**: :func:`sklearn.datasets.make_classification`
(no shuffling, no label flips).
"""


def make_toy_dataset(
    n_points: int = 100,
    n_informative: int = 2,
    n_noise: int = 3,
    separation: float = 1.0,
    seed: int = 0,
    *,
    as_frame: bool = False,
) -> Dataset | pd.DataFrame:
    """Generate a raw two-class dataset.

    Parameters
    ----------
    n_points : int, default=100
        Number of rows, split evenly between the classes.
    n_informative : int, default=2
        Columns that carry class information.
    n_noise : int, default=3
        Columns of pure noise.
    separation : float, default=1.0
        Distance scale between the class clusters.
    seed : int, default=0
        Seed of the generator.
    as_frame : bool, default=False
        If ``True``, return a DataFrame with a ``label`` column (as it would be
        read from CSV). Access ``frame.attrs["DESCR"]`` for a description.

    Returns
    -------
    Dataset or pd.DataFrame

    Examples
    --------
    >>> from pyqkernel.datasets import make_toy_dataset
    >>> ds = make_toy_dataset(n_points=20)
    >>> ds.n_points, ds.n_features, ds.class_counts
    (20, 5, (10, 10))
    >>> make_toy_dataset(n_points=20, as_frame=True).shape
    (20, 6)
    """
    X, y = make_classification(
        n_samples=n_points,
        n_features=n_informative + n_noise,
        n_informative=n_informative,
        n_redundant=0,
        n_repeated=0,
        n_clusters_per_class=2 if n_informative > 1 else 1,
        class_sep=separation,
        flip_y=0.0,
        shuffle=False,
        random_state=seed,
    )
    names = tuple(
        [f"informative_{i}" for i in range(n_informative)]
        + [f"noise_{i}" for i in range(n_noise)]
    )
    ds = Dataset(np.asarray(X), np.asarray(y), names, "toy")
    if not as_frame:
        return ds
    frame = ds.to_frame()
    frame.attrs["DESCR"] = _DESCR
    return frame
