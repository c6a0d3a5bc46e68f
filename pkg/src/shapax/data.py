"""
Background data
===============

The background dataset realizes the data distribution in the empirical
marginal game. Rows are observations, columns are features.

Example
-------
>>> data = Dataset(np.array([[0.0, 0.0], [2.0, 2.0]]))
>>> data.shape
(2, 2)
>>> data.names
('x1', 'x2')
"""

from __future__ import annotations

import io
import logging
import os
import warnings
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)


class Dataset:
    """
    Background dataset of ``K`` observations with ``n`` features.

    Parameters
    ----------
    rows : ndarray
        ``(K, n)`` matrix of finite reals.
    names : sequence of str, optional
        Feature identifiers, defaults to ``x1, ..., xn``.
    """

    rows: np.ndarray
    """Observations as ``(K, n)`` float64 matrix"""

    names: Tuple[str, ...]
    """Feature identifiers"""

    __slots__ = ["rows", "names"]

    def __init__(self, rows, names: Optional[Sequence[str]] = None):
        rows = np.array(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DataError(
                f"dataset needs at least one row and one column, got shape {rows.shape}"
            )
        bad = np.argwhere(~np.isfinite(rows))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"non-finite entry in row {r + 1}, column {c + 1}")
        if names is None:
            names = [f"x{i + 1}" for i in range(rows.shape[1])]
        names = tuple(str(name) for name in names)
        if len(names) != rows.shape[1]:
            raise DataError(
                f"{len(names)} feature names given for {rows.shape[1]} columns"
            )
        rows.setflags(write=False)
        self.rows = rows
        self.names = names

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows.shape

    @property
    def n(self) -> int:
        """Number of features"""
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __getitem__(self, item) -> np.ndarray:
        return self.rows[item]

    def permuted(self, order: Sequence[int]) -> "Dataset":
        """
        Reorder the features.

        Parameters
        ----------
        order : sequence of int
            Column ``k`` of the result is column ``order[k]`` of this dataset.
        """
        order = list(order)
        return Dataset(self.rows[:, order], [self.names[k] for k in order])

    @classmethod
    def from_csv(cls, source: Union[str, os.PathLike, io.TextIOBase]) -> "Dataset":
        """
        Load a dataset from comma separated values.

        The first row is a header with the feature names, every following
        row holds one decimal literal per feature. Missing values are not
        permitted.

        Example
        -------
        >>> text = io.StringIO("a,b\\n1,2\\n3,4.5\\n")
        >>> data = Dataset.from_csv(text)
        >>> data.names, data.rows.tolist()
        (('a', 'b'), [[1.0, 2.0], [3.0, 4.5]])
        """
        if isinstance(source, io.TextIOBase):
            return cls._read(source, "<stream>")
        with open(source, encoding="utf-8") as fd:
            return cls._read(fd, os.fspath(source))

    @classmethod
    def _read(cls, fd, label: str) -> "Dataset":
        header = fd.readline()
        if not header.strip():
            raise DataError(f"{label}: empty file")
        names = [name.strip() for name in header.rstrip("\r\n").split(",")]
        with warnings.catch_warnings():
            # a header without rows is reported below
            warnings.simplefilter("ignore", UserWarning)
            try:
                rows = np.loadtxt(fd, delimiter=",", dtype=np.float64, ndmin=2)
            except ValueError as err:
                raise DataError(f"{label}: {err}") from None
        if rows.size == 0:
            raise DataError(f"{label}: no observations after the header")
        if rows.shape[1] != len(names):
            raise DataError(
                f"{label}: expected {len(names)} values per row, got {rows.shape[1]}"
            )
        logger.debug("read %d observations of %d features from %s", *rows.shape, label)
        return cls(rows, names)

    def to_csv(self, path: Union[str, os.PathLike]):
        """Write the dataset in the format read by :meth:`from_csv`."""
        np.savetxt(
            path,
            self.rows,
            fmt="%.17g",
            delimiter=",",
            header=",".join(self.names),
            comments="",
            encoding="utf-8",
        )
