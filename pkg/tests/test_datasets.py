import numpy as np
import pytest

from alsim.datasets import (
    DatasetError,
    load_dataset_csv,
    make_blobs,
    make_two_moons,
    split_dataset,
    write_dataset_csv,
    write_split_csv,
)


class TestBlobs:
    def test_shapes_and_label_range(self):
        X, y = make_blobs(1000, n_classes=5, dim=3, seed=0)
        assert X.shape == (1000, 3)
        assert set(np.unique(y)) <= set(range(5))

    def test_roughly_balanced(self):
        # multinomial assignment: each class within 3 binomial sigmas of n/C
        n, c = 1000, 5
        _, y = make_blobs(n, n_classes=c, dim=2, seed=1)
        expected = n / c
        sigma = np.sqrt(n * (1 / c) * (1 - 1 / c))
        counts = np.bincount(y, minlength=c)
        assert (np.abs(counts - expected) <= 3 * sigma).all()

    def test_deterministic_per_seed(self):
        a = make_blobs(100, 3, 2, seed=7)
        b = make_blobs(100, 3, 2, seed=7)
        c = make_blobs(100, 3, 2, seed=8)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        assert not np.array_equal(a[0], c[0])


class TestTwoMoons:
    def test_binary_labels_and_plane(self):
        X, y = make_two_moons(200, noise=0.05, seed=2)
        assert X.shape == (200, 2)
        assert set(np.unique(y)) == {0, 1}


class TestSplit:
    def test_split_partitions_rows(self):
        X, y = make_blobs(120, 3, 2, seed=3)
        ds = split_dataset(X, y, test_fraction=0.25, seed=4)
        assert ds.n_pool + len(ds.test_x) == 120
        assert len(ds.test_x) == 30
        overlap = set(ds.pool_rows) & set(ds.test_rows)
        assert not overlap

    def test_degenerate_fraction(self):
        X, y = make_blobs(10, 2, 2, seed=5)
        with pytest.raises(DatasetError):
            split_dataset(X, y, test_fraction=1.0, seed=6)


class TestCsvRoundtrip:
    def test_write_load(self, tmp_path):
        X, y = make_blobs(50, 3, 4, seed=9)
        data = tmp_path / "data.csv"
        split = tmp_path / "split.csv"
        write_dataset_csv(data, X, y)
        write_split_csv(split, [0, 5, 9])
        ds = load_dataset_csv(data, split)
        assert ds.n_classes == 3
        assert ds.n_pool == 47
        np.testing.assert_array_equal(ds.test_rows, [0, 5, 9])
        np.testing.assert_allclose(ds.test_x, X[[0, 5, 9]], atol=1e-12)
        np.testing.assert_array_equal(ds.test_y, y[[0, 5, 9]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            load_dataset_csv(tmp_path / "nope.csv", tmp_path / "s.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n1,2,0\n")
        with pytest.raises(DatasetError, match="header"):
            load_dataset_csv(path, tmp_path / "s.csv")

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("feature_0,label\n1.0,0\n2.0\n")
        with pytest.raises(DatasetError, match="columns"):
            load_dataset_csv(path, tmp_path / "s.csv")

    def test_bad_split_indices(self, tmp_path):
        data = tmp_path / "data.csv"
        split = tmp_path / "split.csv"
        X, y = make_blobs(10, 2, 2, seed=10)
        write_dataset_csv(data, X, y)
        split.write_text("test_index\n99\n")
        with pytest.raises(DatasetError, match="out of range"):
            load_dataset_csv(data, split)
