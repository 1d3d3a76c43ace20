import numpy as np
import pytest

from wcoresets.io import read_coreset_csv, read_json, sha256_array, sha256_file, write_coreset_csv, write_json
from wcoresets.measures import DataError


def test_coreset_csv_round_trip_is_exact(tmp_path):
    pts = np.random.default_rng(0).normal(size=(7, 3)) * 1e5
    write_coreset_csv(tmp_path / "c.csv", pts)
    np.testing.assert_array_equal(read_coreset_csv(tmp_path / "c.csv"), pts)
    assert "," in (tmp_path / "c.csv").read_text().splitlines()[0]


def test_labelled_round_trip(tmp_path):
    pts = np.random.default_rng(1).normal(size=(4, 2))
    write_coreset_csv(tmp_path / "c.csv", pts, np.array([0, 1, 1, 0]))
    got, labels = read_coreset_csv(tmp_path / "c.csv", labeled=True)
    np.testing.assert_array_equal(got, pts)
    assert labels.tolist() == [0, 1, 1, 0] and labels.dtype.kind == "i"
    write_coreset_csv(tmp_path / "s.csv", pts, np.array([0.25, 1.0, 0.0, 0.5]))
    assert read_coreset_csv(tmp_path / "s.csv", labeled=True)[1].tolist() == [0.25, 1.0, 0.0, 0.5]


def test_corrupt_coreset(tmp_path):
    (tmp_path / "c.csv").write_text("1.0,2.0\n3.0,oops\n")
    with pytest.raises(DataError, match="row 2"):
        read_coreset_csv(tmp_path / "c.csv")


def test_label_length_checked(tmp_path):
    with pytest.raises(ValueError):
        write_coreset_csv(tmp_path / "c.csv", np.zeros((3, 2)), np.zeros(2, dtype=int))


def test_json_and_hashes(tmp_path):
    write_json(tmp_path / "a.json", {"b": np.arange(3), "a": np.float64(1.5), "c": np.int64(2)})
    assert read_json(tmp_path / "a.json") == {"a": 1.5, "b": [0, 1, 2], "c": 2}
    h = sha256_file(tmp_path / "a.json")
    assert len(h) == 64 and h == sha256_file(tmp_path / "a.json")
    assert sha256_array(np.ones(3)) == sha256_array(np.ones(3, dtype=np.float32)) != sha256_array(np.zeros(3))
