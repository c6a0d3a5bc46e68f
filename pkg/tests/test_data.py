import io

import numpy as np
import pytest

from shapax.data import Dataset
from shapax.errors import DataError


def test_dataset_is_read_only():
    data = Dataset([[1.0, 2.0]])
    with pytest.raises(ValueError):
        data.rows[0, 0] = 3.0


@pytest.mark.parametrize("rows", [[], [[np.nan, 1.0]], [[np.inf]], [1.0, 2.0]])
def test_dataset_rejects(rows):
    with pytest.raises(DataError):
        Dataset(rows)


def test_dataset_names():
    assert Dataset([[1.0, 2.0, 3.0]]).names == ("x1", "x2", "x3")
    with pytest.raises(DataError):
        Dataset([[1.0, 2.0]], names=["a"])


def test_dataset_permuted():
    data = Dataset([[1.0, 2.0, 3.0]], names=["a", "b", "c"])
    permuted = data.permuted([2, 0, 1])
    assert permuted.rows.tolist() == [[3.0, 1.0, 2.0]]
    assert permuted.names == ("c", "a", "b")


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "empty"),
        ("a,b\n", "no observations"),
        ("a,b\n1,2\n3\n", "<stream>"),
        ("a,b,c\n1,2\n", "expected 3 values"),
        ("a,b\n1,\n", "<stream>"),
        ("a,b\n1,x\n", "<stream>"),
        ("a\nnan\n", "non-finite"),
    ],
)
def test_csv_errors(text, message):
    with pytest.raises(DataError, match=message):
        Dataset.from_csv(io.StringIO(text))


def test_csv_round_trip(tmp_path, rng):
    data = Dataset(rng.normal(size=(5, 3)), names=["u", "v", "w"])
    path = tmp_path / "data.csv"
    data.to_csv(path)
    loaded = Dataset.from_csv(path)
    assert loaded.names == data.names
    np.testing.assert_array_equal(loaded.rows, data.rows)


def test_csv_single_column_and_blank_lines():
    data = Dataset.from_csv(io.StringIO("a\n1\n\n2.5\n"))
    assert data.shape == (2, 1)
    assert data.rows.tolist() == [[1.0], [2.5]]
